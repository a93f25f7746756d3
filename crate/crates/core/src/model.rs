//! Model containers: constraint regimes, the NNTuck factors, reconstruction
//! and free-parameter accounting.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Which constraint the layer factor `Y` carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegimeKind {
    /// `Y = I`, `C = L`: every layer has its own affinity slice.
    Independent,
    /// Free `Y` with `C < L` layer communities.
    Dependent,
    /// `Y = 1`, `C = 1`: all layers share one slice.
    Redundant,
    /// Social-cognitive agreement: `L = N`, `C = K`, `U = Y`.
    Sca,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 4] = [
        RegimeKind::Independent,
        RegimeKind::Dependent,
        RegimeKind::Redundant,
        RegimeKind::Sca,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeKind::Independent => "independent",
            RegimeKind::Dependent => "dependent",
            RegimeKind::Redundant => "redundant",
            RegimeKind::Sca => "sca",
        }
    }
}

impl fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegimeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "independent" => Ok(RegimeKind::Independent),
            "dependent" => Ok(RegimeKind::Dependent),
            "redundant" => Ok(RegimeKind::Redundant),
            "sca" => Ok(RegimeKind::Sca),
            other => Err(Error::arg(format!(
                "unknown regime `{other}` (expected independent, dependent, redundant or sca)"
            ))),
        }
    }
}

/// Regime plus ranks. `C` is stored only for the dependent regime; the other
/// regimes force it (`L`, `1`, `K`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ModelSpec {
    kind: RegimeKind,
    k: usize,
    dependent_c: usize,
    symmetric: bool,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    regime: RegimeKind,
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<usize>,
    #[serde(default)]
    symmetric: bool,
}

impl TryFrom<RawSpec> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        let spec = match raw.regime {
            RegimeKind::Dependent => {
                let c = raw.c.ok_or_else(|| Error::arg("dependent spec needs `c`"))?;
                ModelSpec::dependent(raw.k, c)
            }
            kind => ModelSpec::new(kind, raw.k, 0),
        };
        Ok(spec.with_symmetric(raw.symmetric))
    }
}

impl From<ModelSpec> for RawSpec {
    fn from(s: ModelSpec) -> Self {
        RawSpec {
            regime: s.kind,
            k: s.k,
            c: (s.kind == RegimeKind::Dependent).then_some(s.dependent_c),
            symmetric: s.symmetric,
        }
    }
}

impl ModelSpec {
    fn new(kind: RegimeKind, k: usize, dependent_c: usize) -> Self {
        Self {
            kind,
            k,
            dependent_c,
            symmetric: false,
        }
    }

    pub fn independent(k: usize) -> Self {
        Self::new(RegimeKind::Independent, k, 0)
    }

    pub fn dependent(k: usize, c: usize) -> Self {
        Self::new(RegimeKind::Dependent, k, c)
    }

    pub fn redundant(k: usize) -> Self {
        Self::new(RegimeKind::Redundant, k, 0)
    }

    pub fn sca(k: usize) -> Self {
        Self::new(RegimeKind::Sca, k, 0)
    }

    /// Undirected variant: `U = V` and symmetric core slices.
    pub fn with_symmetric(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn kind(&self) -> RegimeKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    /// Number of layer communities for a tensor with `l` layers.
    pub fn c(&self, l: usize) -> usize {
        match self.kind {
            RegimeKind::Independent => l,
            RegimeKind::Dependent => self.dependent_c,
            RegimeKind::Redundant => 1,
            RegimeKind::Sca => self.k,
        }
    }

    /// The `C` reported in tables: `None` when forced by the regime.
    pub fn free_c(&self) -> Option<usize> {
        (self.kind == RegimeKind::Dependent).then_some(self.dependent_c)
    }

    /// Checks the spec against an `n × n × l` tensor.
    pub fn check(&self, n: usize, l: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::arg("K must be positive"));
        }
        if self.k > n {
            return Err(Error::arg(format!("K = {} exceeds N = {n}", self.k)));
        }
        match self.kind {
            RegimeKind::Dependent => {
                let c = self.dependent_c;
                if c == 0 {
                    return Err(Error::arg("C must be positive"));
                }
                if c >= l {
                    return Err(Error::arg(format!("dependent regime needs C < L, got C = {c}, L = {l}")));
                }
            }
            RegimeKind::Sca => {
                if l != n {
                    return Err(Error::arg(format!("SCA requires L=N, got N = {n}, L = {l}")));
                }
                if self.k >= l {
                    return Err(Error::arg(format!("SCA needs C = K < L, got K = {}, L = {l}", self.k)));
                }
                if self.symmetric {
                    return Err(Error::arg("the symmetric flag is not supported for SCA"));
                }
            }
            RegimeKind::Independent | RegimeKind::Redundant => {}
        }
        Ok(())
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.k)?;
        if self.kind == RegimeKind::Dependent {
            write!(f, ":{}", self.dependent_c)?;
        }
        if self.symmetric {
            f.write_str("+sym")?;
        }
        Ok(())
    }
}

/// Parses `regime:K[:C][+sym]`, e.g. `dependent:3:2`, `redundant:3`, `sca:2`.
impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (body, symmetric) = match s.trim().strip_suffix("+sym") {
            Some(b) => (b, true),
            None => (s.trim(), false),
        };
        let parts: Vec<&str> = body.split(':').collect();
        let kind: RegimeKind = parts[0].parse()?;
        let num = |idx: usize, name: &str| -> Result<usize> {
            let raw = parts
                .get(idx)
                .ok_or_else(|| Error::arg(format!("spec `{s}` is missing {name}")))?;
            raw.parse()
                .map_err(|_| Error::arg(format!("spec `{s}`: {name} must be a positive integer")))
        };
        let expected = if kind == RegimeKind::Dependent { 3 } else { 2 };
        if parts.len() != expected {
            return Err(Error::arg(format!(
                "spec `{s}` should look like {}",
                if kind == RegimeKind::Dependent { "dependent:K:C" } else { "regime:K" }
            )));
        }
        let k = num(1, "K")?;
        let spec = if kind == RegimeKind::Dependent {
            ModelSpec::dependent(k, num(2, "C")?)
        } else {
            ModelSpec::new(kind, k, 0)
        };
        Ok(spec.with_symmetric(symmetric))
    }
}

/// Number of free parameters of `spec` on an `n × n × l` tensor.
///
/// A fixed `Y` (identity or ones) contributes nothing; SCA shares `U` with
/// `Y`. The symmetric flag halves the membership count and keeps only the
/// upper triangle of each core slice.
pub fn param_count(spec: &ModelSpec, n: usize, l: usize) -> usize {
    let k = spec.k;
    let c = spec.c(l);
    let memberships = if spec.symmetric { n * k } else { 2 * n * k };
    let core = if spec.symmetric { c * k * (k + 1) / 2 } else { k * k * c };
    let layer = match spec.kind {
        RegimeKind::Dependent => l * c,
        RegimeKind::Independent | RegimeKind::Redundant | RegimeKind::Sca => 0,
    };
    memberships + core + layer
}

/// Fitted or planted NNTuck factors: `Â = G ×₁ U ×₂ V ×₃ Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct NNTuckModel {
    pub(crate) u: Array2<f64>,
    pub(crate) v: Array2<f64>,
    pub(crate) y: Array2<f64>,
    pub(crate) g: Tensor3,
}

impl NNTuckModel {
    /// `u`, `v`: `N × K`; `y`: `L × C`; `g`: `K × K × C`.
    pub fn new(u: Array2<f64>, v: Array2<f64>, y: Array2<f64>, g: Tensor3) -> Result<Self> {
        let (n, k) = u.dim();
        let (l, c) = y.dim();
        if v.dim() != (n, k) {
            return Err(Error::arg(format!("V is {:?}, expected {:?}", v.dim(), (n, k))));
        }
        if g.dims() != [k, k, c] {
            return Err(Error::arg(format!("core is {:?}, expected {:?}", g.dims(), [k, k, c])));
        }
        if n == 0 || k == 0 || l == 0 || c == 0 {
            return Err(Error::arg("model dims must be positive"));
        }
        for (name, m) in [("U", &u), ("V", &v), ("Y", &y)] {
            if let Some(bad) = m.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(Error::arg(format!("{name} must be finite and nonnegative, found {bad}")));
            }
        }
        Ok(Self { u, v, y, g })
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    pub fn v(&self) -> &Array2<f64> {
        &self.v
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn core(&self) -> &Tensor3 {
        &self.g
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    pub fn l(&self) -> usize {
        self.y.nrows()
    }

    pub fn c(&self) -> usize {
        self.y.ncols()
    }

    /// The rate tensor `G ×₁ U ×₂ V ×₃ Y`, dims `(N, N, L)`.
    pub fn reconstruct(&self) -> Tensor3 {
        self.g
            .mode_product_view(self.u.view(), 1)
            .mode_product_view(self.v.view(), 2)
            .mode_product_view(self.y.view(), 3)
    }

    /// Every way this model breaks the constraints of `spec`.
    pub fn validate(&self, spec: &ModelSpec) -> Vec<Violation> {
        let mut out = Vec::new();
        let (n, l) = (self.n(), self.l());
        if self.k() != spec.k() || self.c() != spec.c(l) {
            out.push(Violation::Dims(format!(
                "model has K = {}, C = {}; spec wants K = {}, C = {}",
                self.k(),
                self.c(),
                spec.k(),
                spec.c(l)
            )));
        }
        if let Err(e) = spec.check(n, l) {
            out.push(Violation::Dims(e.to_string()));
        }
        match spec.kind() {
            RegimeKind::Independent => {
                let eye_ok = self.y.indexed_iter().all(|((r, c), &x)| x == if r == c { 1.0 } else { 0.0 });
                if !(self.y.is_square() && eye_ok) {
                    out.push(Violation::YNotIdentity);
                }
            }
            RegimeKind::Redundant => {
                if self.c() != 1 || self.y.iter().any(|&x| x != 1.0) {
                    out.push(Violation::YNotOnes);
                }
            }
            RegimeKind::Sca => {
                if self.u != self.y {
                    out.push(Violation::UNotY);
                }
            }
            RegimeKind::Dependent => {}
        }
        if spec.symmetric() {
            if self.u != self.v {
                out.push(Violation::UNotV);
            }
            if !self.g.has_symmetric_slices() {
                out.push(Violation::CoreAsymmetry);
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    core: Tensor3,
}

impl TryFrom<RawModel> for NNTuckModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let [k, _, c] = raw.core.dims();
        let n = raw.u.len();
        let l = raw.y.len();
        NNTuckModel::new(
            from_rows(&raw.u, n, k, "u")?,
            from_rows(&raw.v, n, k, "v")?,
            from_rows(&raw.y, l, c, "y")?,
            raw.core,
        )
    }
}

impl From<NNTuckModel> for RawModel {
    fn from(m: NNTuckModel) -> Self {
        RawModel {
            u: rows(&m.u),
            v: rows(&m.v),
            y: rows(&m.y),
            core: m.g,
        }
    }
}

/// A broken regime constraint reported by [`NNTuckModel::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Dims(String),
    YNotIdentity,
    YNotOnes,
    UNotY,
    UNotV,
    CoreAsymmetry,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dims(s) => write!(f, "dims: {s}"),
            Violation::YNotIdentity => f.write_str("Y≠I"),
            Violation::YNotOnes => f.write_str("Y≠1"),
            Violation::UNotY => f.write_str("U≠Y"),
            Violation::UNotV => f.write_str("U≠V"),
            Violation::CoreAsymmetry => f.write_str("core asymmetry"),
        }
    }
}

/// JSON form of a model: dims block, row-major factors, core, spec and
/// provenance. Floats round-trip bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub dims: ModelDims,
    pub spec: ModelSpec,
    pub seed: Option<u64>,
    pub final_kl: Option<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub core: Tensor3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub c: usize,
}

impl ModelDocument {
    pub fn new(model: &NNTuckModel, spec: ModelSpec, seed: Option<u64>, final_kl: Option<f64>) -> Self {
        Self {
            dims: ModelDims {
                n: model.n(),
                l: model.l(),
                k: model.k(),
                c: model.c(),
            },
            spec,
            seed,
            final_kl,
            u: rows(&model.u),
            v: rows(&model.v),
            y: rows(&model.y),
            core: model.g.clone(),
        }
    }

    pub fn to_model(&self) -> Result<NNTuckModel> {
        let d = self.dims;
        let model = NNTuckModel::new(
            from_rows(&self.u, d.n, d.k, "u")?,
            from_rows(&self.v, d.n, d.k, "v")?,
            from_rows(&self.y, d.l, d.c, "y")?,
            self.core.clone(),
        )?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub(crate) fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<Array2<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::arg(format!("matrix `{name}` should be {nrows} × {ncols}")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((nrows, ncols), flat).expect("shape checked"))
}

/// Serde adapter writing a matrix as a list of rows.
pub(crate) mod matrix_rows {
    use ndarray::Array2;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        super::from_rows(&rows, rows.len(), ncols, "matrix").map_err(D::Error::custom)
    }
}
