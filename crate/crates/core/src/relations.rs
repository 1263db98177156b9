//! Affine input transformations `X' = alpha X + beta` over the flat state vector.
//!
//! Three encodings of `alpha` are supported. `Dense` stores the full `D x D`
//! matrix. `Diagonal` stores one scale per entry. `SignedPermScale` moves each
//! ssh entry to a new position with a per-entry factor, and applies a
//! permutation with per-entry factors to the four trailing parameters. Every
//! catalogue symmetry of the energy diagnostic is a `SignedPermScale`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::kernel::{GridDims, CORIOLIS_OFFSET, DX_OFFSET, DY_OFFSET, GRAVITY_OFFSET, PARAM_COUNT};

pub const RELATION_SCHEMA: &str = "morphoseek-relation/1";

const IDENTITY_PARAM_PERM: [usize; PARAM_COUNT] = [0, 1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Space {
    Dense,
    Diagonal,
    SignedPermScale,
}

impl Space {
    pub fn name(&self) -> &'static str {
        match self {
            Space::Dense => "dense",
            Space::Diagonal => "diagonal",
            Space::SignedPermScale => "signed-perm-scale",
        }
    }
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Space {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Space::Dense),
            "diagonal" => Ok(Space::Diagonal),
            "signed-perm-scale" => Ok(Space::SignedPermScale),
            other => Err(Error::Config(format!(
                "unknown parameter space `{other}` (expected dense, diagonal or signed-perm-scale)"
            ))),
        }
    }
}

/// Linear part of an affine relation.
#[derive(Debug, Clone, PartialEq)]
pub enum Alpha {
    /// Row-major `D x D`.
    Dense(Vec<f64>),
    Diagonal(Vec<f64>),
    /// Source ssh entry `k` lands at `ssh_perm[k]` scaled by `ssh_scale[k]`;
    /// parameter `p` lands at `param_perm[p]` scaled by `param_scale[p]`.
    SignedPermScale {
        ssh_perm: Vec<usize>,
        ssh_scale: Vec<f64>,
        param_perm: [usize; PARAM_COUNT],
        param_scale: [f64; PARAM_COUNT],
    },
}

impl Alpha {
    pub fn space(&self) -> Space {
        match self {
            Alpha::Dense(_) => Space::Dense,
            Alpha::Diagonal(_) => Space::Diagonal,
            Alpha::SignedPermScale { .. } => Space::SignedPermScale,
        }
    }
}

/// Provenance attached to a relation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineRelation {
    pub dims: GridDims,
    pub alpha: Alpha,
    pub beta: Vec<f64>,
    pub meta: RelationMeta,
}

fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

fn check_finite(values: &[f64], location: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::format(format!("{location}[{k}]"), "coefficient is not finite")),
        None => Ok(()),
    }
}

impl AffineRelation {
    /// Builds a relation and checks its invariants.
    pub fn new(dims: GridDims, alpha: Alpha, beta: Vec<f64>) -> Result<Self> {
        let rel = AffineRelation {
            dims,
            alpha,
            beta,
            meta: RelationMeta::default(),
        };
        rel.check()?;
        Ok(rel)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.meta.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.meta.name.as_deref()
    }

    pub fn space(&self) -> Space {
        self.alpha.space()
    }

    pub fn state_len(&self) -> usize {
        self.dims.state_len()
    }

    /// Checks encoding lengths, permutation validity and finiteness.
    pub fn check(&self) -> Result<()> {
        self.dims.check().map_err(|e| Error::format("dims", e.to_string()))?;
        let d = self.dims.state_len();
        let n = self.dims.ssh_len();
        if self.beta.len() != d {
            return Err(Error::format(
                "beta",
                format!("expected {d} offsets, found {}", self.beta.len()),
            ));
        }
        check_finite(&self.beta, "beta")?;
        match &self.alpha {
            Alpha::Dense(a) => {
                if a.len() != d * d {
                    return Err(Error::format(
                        "alpha",
                        format!("dense alpha needs {} entries, found {}", d * d, a.len()),
                    ));
                }
                check_finite(a, "alpha")?;
            }
            Alpha::Diagonal(a) => {
                if a.len() != d {
                    return Err(Error::format(
                        "alpha",
                        format!("diagonal alpha needs {d} entries, found {}", a.len()),
                    ));
                }
                check_finite(a, "alpha")?;
            }
            Alpha::SignedPermScale {
                ssh_perm,
                ssh_scale,
                param_perm,
                param_scale,
            } => {
                if ssh_perm.len() != n {
                    return Err(Error::format(
                        "alpha.ssh_perm",
                        format!("expected {n} targets, found {}", ssh_perm.len()),
                    ));
                }
                if ssh_scale.len() != n {
                    return Err(Error::format(
                        "alpha.ssh_scale",
                        format!("expected {n} factors, found {}", ssh_scale.len()),
                    ));
                }
                if !is_permutation(ssh_perm) {
                    return Err(Error::format("alpha.ssh_perm", "targets are not a permutation"));
                }
                if !is_permutation(param_perm) {
                    return Err(Error::format("alpha.param_perm", "targets are not a permutation"));
                }
                check_finite(ssh_scale, "alpha.ssh_scale")?;
                check_finite(param_scale, "alpha.param_scale")?;
                if let Some(k) = param_scale.iter().position(|&v| v == 0.0) {
                    return Err(Error::format(
                        format!("alpha.param_scale[{k}]"),
                        "parameter factors must be nonzero",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Identity in the requested encoding.
    pub fn identity_in(space: Space, dims: GridDims) -> Self {
        let d = dims.state_len();
        let n = dims.ssh_len();
        let alpha = match space {
            Space::Dense => {
                let mut a = vec![0.0; d * d];
                for k in 0..d {
                    a[k * d + k] = 1.0;
                }
                Alpha::Dense(a)
            }
            Space::Diagonal => Alpha::Diagonal(vec![1.0; d]),
            Space::SignedPermScale => Alpha::SignedPermScale {
                ssh_perm: (0..n).collect(),
                ssh_scale: vec![1.0; n],
                param_perm: IDENTITY_PARAM_PERM,
                param_scale: [1.0; PARAM_COUNT],
            },
        };
        AffineRelation {
            dims,
            alpha,
            beta: vec![0.0; d],
            meta: RelationMeta {
                name: Some("identity".into()),
                ..Default::default()
            },
        }
    }

    pub fn identity(dims: GridDims) -> Self {
        Self::identity_in(Space::SignedPermScale, dims)
    }

    /// True when the relation is the identity map, whatever its encoding.
    pub fn is_identity(&self) -> bool {
        if self.beta.iter().any(|&b| b != 0.0) {
            return false;
        }
        let d = self.state_len();
        match &self.alpha {
            Alpha::Dense(a) => a
                .iter()
                .enumerate()
                .all(|(k, &v)| v == if k / d == k % d { 1.0 } else { 0.0 }),
            Alpha::Diagonal(a) => a.iter().all(|&v| v == 1.0),
            Alpha::SignedPermScale {
                ssh_perm,
                ssh_scale,
                param_perm,
                param_scale,
            } => {
                ssh_perm.iter().enumerate().all(|(k, &p)| k == p)
                    && ssh_scale.iter().all(|&v| v == 1.0)
                    && *param_perm == IDENTITY_PARAM_PERM
                    && param_scale.iter().all(|&v| v == 1.0)
            }
        }
    }

    /// Writes `alpha * vec + beta` into `out`. Both slices must have length `D`.
    pub fn apply_into(&self, vec: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.state_len();
        if vec.len() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: vec.len(),
            });
        }
        if out.len() != d {
            return Err(Error::Dimension {
                expected: d,
                actual: out.len(),
            });
        }
        match &self.alpha {
            Alpha::Dense(a) => {
                for (k, row) in a.chunks_exact(d).enumerate() {
                    let mut acc = 0.0;
                    for (coef, x) in row.iter().zip(vec) {
                        acc += coef * x;
                    }
                    out[k] = acc + self.beta[k];
                }
            }
            Alpha::Diagonal(a) => {
                for k in 0..d {
                    out[k] = a[k] * vec[k] + self.beta[k];
                }
            }
            Alpha::SignedPermScale {
                ssh_perm,
                ssh_scale,
                param_perm,
                param_scale,
            } => {
                let n = self.dims.ssh_len();
                for k in 0..n {
                    let target = ssh_perm[k];
                    out[target] = ssh_scale[k] * vec[k] + self.beta[target];
                }
                for p in 0..PARAM_COUNT {
                    let target = n + param_perm[p];
                    out[target] = param_scale[p] * vec[n + p] + self.beta[target];
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, vec: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.state_len()];
        self.apply_into(vec, &mut out)?;
        Ok(out)
    }

    /// Explicit row-major `D x D` matrix of the linear part.
    pub fn dense_matrix(&self) -> Vec<f64> {
        let d = self.state_len();
        let n = self.dims.ssh_len();
        match &self.alpha {
            Alpha::Dense(a) => a.clone(),
            Alpha::Diagonal(a) => {
                let mut m = vec![0.0; d * d];
                for k in 0..d {
                    m[k * d + k] = a[k];
                }
                m
            }
            Alpha::SignedPermScale {
                ssh_perm,
                ssh_scale,
                param_perm,
                param_scale,
            } => {
                let mut m = vec![0.0; d * d];
                for k in 0..n {
                    m[ssh_perm[k] * d + k] = ssh_scale[k];
                }
                for p in 0..PARAM_COUNT {
                    m[(n + param_perm[p]) * d + n + p] = param_scale[p];
                }
                m
            }
        }
    }

    /// Same map in the dense encoding.
    pub fn to_dense(&self) -> AffineRelation {
        AffineRelation {
            dims: self.dims,
            alpha: Alpha::Dense(self.dense_matrix()),
            beta: self.beta.clone(),
            meta: self.meta.clone(),
        }
    }

    /// Number of real coefficients the search may perturb.
    pub fn coefficient_count(&self) -> usize {
        let alpha = match &self.alpha {
            Alpha::Dense(a) | Alpha::Diagonal(a) => a.len(),
            Alpha::SignedPermScale { ssh_scale, .. } => ssh_scale.len() + PARAM_COUNT,
        };
        alpha + self.beta.len()
    }

    /// Mutable access to the `k`-th perturbable coefficient: linear part first,
    /// then offsets.
    pub fn coefficient_mut(&mut self, k: usize) -> &mut f64 {
        let alpha_len = self.coefficient_count() - self.beta.len();
        if k >= alpha_len {
            return &mut self.beta[k - alpha_len];
        }
        match &mut self.alpha {
            Alpha::Dense(a) | Alpha::Diagonal(a) => &mut a[k],
            Alpha::SignedPermScale {
                ssh_scale,
                param_scale,
                ..
            } => {
                if k < ssh_scale.len() {
                    &mut ssh_scale[k]
                } else {
                    &mut param_scale[k - ssh_scale.len()]
                }
            }
        }
    }

    /// Value of coefficient `k` in the identity map of the same encoding.
    pub fn identity_coefficient(&self, k: usize) -> f64 {
        let d = self.state_len();
        let alpha_len = self.coefficient_count() - self.beta.len();
        if k >= alpha_len {
            return 0.0;
        }
        match &self.alpha {
            Alpha::Dense(_) => {
                if k / d == k % d {
                    1.0
                } else {
                    0.0
                }
            }
            Alpha::Diagonal(_) | Alpha::SignedPermScale { .. } => 1.0,
        }
    }

    /// Clamps every perturbable coefficient into `[-bound, bound]`.
    pub fn clamp_coefficients(&mut self, bound: f64) {
        for k in 0..self.coefficient_count() {
            let c = self.coefficient_mut(k);
            *c = c.clamp(-bound, bound);
        }
    }

    pub fn coefficient(&self, k: usize) -> f64 {
        let alpha_len = self.coefficient_count() - self.beta.len();
        if k >= alpha_len {
            return self.beta[k - alpha_len];
        }
        match &self.alpha {
            Alpha::Dense(a) | Alpha::Diagonal(a) => a[k],
            Alpha::SignedPermScale {
                ssh_scale,
                param_scale,
                ..
            } => {
                if k < ssh_scale.len() {
                    ssh_scale[k]
                } else {
                    param_scale[k - ssh_scale.len()]
                }
            }
        }
    }

    // ---- serialization ----

    pub fn to_json_value(&self) -> Value {
        let alpha = match &self.alpha {
            Alpha::Dense(a) | Alpha::Diagonal(a) => json!(a),
            Alpha::SignedPermScale {
                ssh_perm,
                ssh_scale,
                param_perm,
                param_scale,
            } => {
                let mut m = Map::new();
                m.insert("ssh_perm".into(), json!(ssh_perm));
                m.insert("ssh_scale".into(), json!(ssh_scale));
                m.insert("param_scale".into(), json!(param_scale));
                if *param_perm != IDENTITY_PARAM_PERM {
                    m.insert("param_perm".into(), json!(param_perm));
                }
                Value::Object(m)
            }
        };
        json!({
            "schema": RELATION_SCHEMA,
            "dims": self.dims,
            "space": self.space(),
            "alpha": alpha,
            "beta": self.beta,
            "meta": self.meta,
        })
    }

    /// Compact JSON document. Numbers use the shortest representation that
    /// parses back to the same `f64`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("relation documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::format(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        Self::from_json_value(&value)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let doc = value
            .as_object()
            .ok_or_else(|| Error::format("$", "relation document must be an object"))?;
        for key in doc.keys() {
            if !matches!(key.as_str(), "schema" | "dims" | "space" | "alpha" | "beta" | "meta") {
                return Err(Error::format(key.clone(), "unknown field"));
            }
        }
        let schema = doc
            .get("schema")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::format("schema", "missing schema id"))?;
        if schema != RELATION_SCHEMA {
            return Err(Error::format(
                "schema",
                format!("unsupported schema `{schema}` (expected {RELATION_SCHEMA})"),
            ));
        }
        let dims: GridDims = field(doc, "dims")?;
        dims.check().map_err(|e| Error::format("dims", e.to_string()))?;
        let space: Space = field(doc, "space")?;
        let beta: Vec<f64> = field(doc, "beta")?;
        let meta: RelationMeta = match doc.get("meta") {
            None | Some(Value::Null) => RelationMeta::default(),
            Some(_) => field(doc, "meta")?,
        };
        let alpha_value = doc.get("alpha").ok_or_else(|| Error::format("alpha", "missing field"))?;
        let alpha = match space {
            Space::Dense => Alpha::Dense(decode(alpha_value, "alpha")?),
            Space::Diagonal => Alpha::Diagonal(decode(alpha_value, "alpha")?),
            Space::SignedPermScale => {
                let obj = alpha_value
                    .as_object()
                    .ok_or_else(|| Error::format("alpha", "signed-perm-scale alpha must be an object"))?;
                for key in obj.keys() {
                    if !matches!(key.as_str(), "ssh_perm" | "ssh_scale" | "param_scale" | "param_perm") {
                        return Err(Error::format(format!("alpha.{key}"), "unknown field"));
                    }
                }
                let param_scale: Vec<f64> = field_at(obj, "param_scale", "alpha")?;
                let param_perm: Vec<usize> = match obj.get("param_perm") {
                    None => IDENTITY_PARAM_PERM.to_vec(),
                    Some(_) => field_at(obj, "param_perm", "alpha")?,
                };
                Alpha::SignedPermScale {
                    ssh_perm: field_at(obj, "ssh_perm", "alpha")?,
                    ssh_scale: field_at(obj, "ssh_scale", "alpha")?,
                    param_perm: param_perm
                        .try_into()
                        .map_err(|_| Error::format("alpha.param_perm", "expected 4 targets"))?,
                    param_scale: param_scale
                        .try_into()
                        .map_err(|_| Error::format("alpha.param_scale", "expected 4 factors"))?,
                }
            }
        };
        let rel = AffineRelation { dims, alpha, beta, meta };
        rel.check()?;
        Ok(rel)
    }
}

fn decode<T: serde::de::DeserializeOwned>(value: &Value, location: &str) -> Result<T> {
    T::deserialize(value).map_err(|e| Error::format(location, e.to_string()))
}

fn field<T: serde::de::DeserializeOwned>(doc: &Map<String, Value>, key: &str) -> Result<T> {
    let value = doc.get(key).ok_or_else(|| Error::format(key, "missing field"))?;
    decode(value, key)
}

fn field_at<T: serde::de::DeserializeOwned>(doc: &Map<String, Value>, key: &str, parent: &str) -> Result<T> {
    let location = format!("{parent}.{key}");
    let value = doc.get(key).ok_or_else(|| Error::format(location.clone(), "missing field"))?;
    decode(value, &location)
}

/// `|apply(a, vec) - apply(b, vec)|`.
pub fn distance(a: &AffineRelation, b: &AffineRelation, vec: &[f64]) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::Dimension {
            expected: a.state_len(),
            actual: b.state_len(),
        });
    }
    let ga = a.apply(vec)?;
    let gb = b.apply(vec)?;
    Ok(squared_distance(&ga, &gb).sqrt())
}

/// Sum of squared differences, accumulated in index order.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// ---- catalogue ----

fn ssh_permutation(dims: GridDims, name: String, target: impl Fn(usize, usize, usize) -> (usize, usize, usize)) -> AffineRelation {
    let mut perm = vec![0; dims.ssh_len()];
    for t in 0..dims.t {
        for j in 0..dims.ny {
            for i in 0..dims.nx {
                let (tt, jj, ii) = target(t, j, i);
                perm[dims.ssh_index(t, j, i)] = dims.ssh_index(tt, jj, ii);
            }
        }
    }
    let mut rel = AffineRelation::identity(dims).with_name(name);
    if let Alpha::SignedPermScale { ssh_perm, .. } = &mut rel.alpha {
        *ssh_perm = perm;
    }
    rel
}

fn param_scaling(dims: GridDims, name: &str, factors: [f64; PARAM_COUNT]) -> AffineRelation {
    let mut rel = AffineRelation::identity(dims).with_name(name);
    if let Alpha::SignedPermScale { param_scale, .. } = &mut rel.alpha {
        *param_scale = factors;
    }
    rel
}

/// `ssh -> -ssh`.
pub fn negate_ssh(dims: GridDims) -> AffineRelation {
    let mut rel = AffineRelation::identity(dims).with_name("negate_ssh");
    if let Alpha::SignedPermScale { ssh_scale, .. } = &mut rel.alpha {
        ssh_scale.iter_mut().for_each(|s| *s = -1.0);
    }
    rel
}

/// `y -> -y`, realised as reversing ssh along the y axis.
pub fn negate_y(dims: GridDims) -> AffineRelation {
    let ny = dims.ny;
    ssh_permutation(dims, "negate_y".into(), |t, j, i| (t, ny - 1 - j, i))
}

/// `x -> -x`, realised as reversing ssh along the x axis.
pub fn negate_x(dims: GridDims) -> AffineRelation {
    let nx = dims.nx;
    ssh_permutation(dims, "negate_x".into(), |t, j, i| (t, j, nx - 1 - i))
}

pub fn negate_gravity(dims: GridDims) -> AffineRelation {
    let mut f = [1.0; PARAM_COUNT];
    f[GRAVITY_OFFSET] = -1.0;
    param_scaling(dims, "negate_G", f)
}

pub fn negate_coriolis(dims: GridDims) -> AffineRelation {
    let mut f = [1.0; PARAM_COUNT];
    f[CORIOLIS_OFFSET] = -1.0;
    param_scaling(dims, "negate_F", f)
}

/// `G -> lambda G`, `F -> lambda F`.
pub fn scale_gf(dims: GridDims, lambda: f64) -> Result<AffineRelation> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(Error::Parameter(format!("G/F scale factor must be finite and nonzero, got {lambda}")));
    }
    let mut f = [1.0; PARAM_COUNT];
    f[GRAVITY_OFFSET] = lambda;
    f[CORIOLIS_OFFSET] = lambda;
    Ok(param_scaling(dims, &format!("scale_gf({lambda})"), f))
}

/// Cyclic roll of ssh by `sy` steps along y and `sx` steps along x.
pub fn translate(dims: GridDims, sy: i64, sx: i64) -> AffineRelation {
    let (ny, nx) = (dims.ny as i64, dims.nx as i64);
    ssh_permutation(dims, format!("translate({sy},{sx})"), move |t, j, i| {
        (t, (j as i64 + sy).rem_euclid(ny) as usize, (i as i64 + sx).rem_euclid(nx) as usize)
    })
}

/// Swaps the y and x axes of ssh together with `dy` and `dx`. Square grids only.
pub fn transpose_xy(dims: GridDims) -> Result<AffineRelation> {
    if !dims.is_square() {
        return Err(Error::Shape(format!(
            "transpose needs NY == NX, grid is {dims}"
        )));
    }
    let mut rel = ssh_permutation(dims, "transpose_xy".into(), |t, j, i| (t, i, j));
    if let Alpha::SignedPermScale { param_perm, .. } = &mut rel.alpha {
        param_perm[DY_OFFSET] = DX_OFFSET;
        param_perm[DX_OFFSET] = DY_OFFSET;
    }
    Ok(rel)
}

/// `ssh -> c ssh` as a diagonal relation.
pub fn scale_ssh(dims: GridDims, c: f64) -> AffineRelation {
    let mut a = vec![1.0; dims.state_len()];
    a[..dims.ssh_len()].iter_mut().for_each(|v| *v = c);
    AffineRelation {
        dims,
        alpha: Alpha::Diagonal(a),
        beta: vec![0.0; dims.state_len()],
        meta: RelationMeta {
            name: Some(format!("scale_ssh({c})")),
            ..Default::default()
        },
    }
}

/// Representative G/F scale used in the catalogue.
pub const CATALOGUE_GF_SCALE: f64 = 2.0;
/// Representative translations used in the catalogue.
pub const CATALOGUE_TRANSLATIONS: [(i64, i64); 3] = [(0, 1), (1, 0), (3, 2)];

/// Known symmetries of the energy diagnostic, each named in its metadata.
/// The transpose is included only on square grids.
pub fn known_symmetries(dims: GridDims) -> Vec<AffineRelation> {
    let mut out = vec![
        negate_ssh(dims),
        negate_y(dims),
        negate_x(dims),
        negate_gravity(dims),
        negate_coriolis(dims),
        scale_gf(dims, CATALOGUE_GF_SCALE).expect("catalogue scale is nonzero"),
    ];
    out.extend(CATALOGUE_TRANSLATIONS.iter().map(|&(sy, sx)| translate(dims, sy, sx)));
    if let Ok(t) = transpose_xy(dims) {
        out.push(t);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{energy_cyclic, norm, random_state, SamplingRanges, StateVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spike_flat() -> Vec<f64> {
        let dims = GridDims::new(1, 4, 4).unwrap();
        let mut s = StateVector::zeros(dims, 1.0, 1.0, 1.0, 1.0);
        s.ssh[0] = 1.0;
        s.flatten()
    }

    fn dense_oracle(rel: &AffineRelation, v: &[f64]) -> Vec<f64> {
        let d = rel.state_len();
        let m = rel.dense_matrix();
        (0..d)
            .map(|k| (0..d).map(|c| m[k * d + c] * v[c]).sum::<f64>() + rel.beta[k])
            .collect()
    }

    #[test]
    fn identity_is_exact() {
        let dims = GridDims::new(2, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..dims.state_len()).map(|_| rng.random_range(-5.0..5.0)).collect();
        for space in [Space::Dense, Space::Diagonal, Space::SignedPermScale] {
            let id = AffineRelation::identity_in(space, dims);
            assert!(id.is_identity());
            assert_eq!(id.apply(&v).unwrap(), v);
            assert_eq!(id.apply(&vec![0.0; v.len()]).unwrap(), vec![0.0; v.len()]);
            assert_eq!(distance(&id, &id, &v).unwrap(), 0.0);
        }
    }

    #[test]
    fn negate_ssh_on_spike() {
        let v = spike_flat();
        let dims = GridDims::new(1, 4, 4).unwrap();
        let out = negate_ssh(dims).apply(&v).unwrap();
        assert_eq!(out[0], -1.0);
        assert_eq!(&out[16..], &v[16..]);
    }

    #[test]
    fn dense_double_identity() {
        let v = spike_flat();
        let dims = GridDims::new(1, 4, 4).unwrap();
        let mut rel = AffineRelation::identity_in(Space::Dense, dims);
        if let Alpha::Dense(a) = &mut rel.alpha {
            a.iter_mut().for_each(|x| *x *= 2.0);
        }
        let out = rel.apply(&v).unwrap();
        let expected: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        assert_eq!(out, expected);
        assert_eq!(out, dense_oracle(&rel, &v));
    }

    #[test]
    fn apply_rejects_wrong_length() {
        let dims = GridDims::new(1, 3, 3).unwrap();
        let err = negate_ssh(dims).apply(&[0.0; 12]).unwrap_err();
        assert_eq!(err, Error::Dimension { expected: 13, actual: 12 });
    }

    #[test]
    fn distance_examples() {
        let dims = GridDims::new(1, 4, 4).unwrap();
        let v = spike_flat();
        let id = AffineRelation::identity(dims);
        assert_eq!(distance(&translate(dims, 0, 1), &id, &v).unwrap(), 2f64.sqrt());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w: Vec<f64> = (0..dims.state_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let expected = 2.0 * norm(&w[..16]).unwrap();
        let got = distance(&negate_ssh(dims), &id, &w).unwrap();
        assert!((got - expected).abs() <= 1e-15 * expected);
        let other = GridDims::new(1, 3, 3).unwrap();
        assert!(distance(&id, &AffineRelation::identity(other), &w).is_err());
    }

    #[test]
    fn translation_group_order() {
        let dims = GridDims::new(2, 3, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..dims.state_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shift = translate(dims, 0, 1);
        let mut w = v.clone();
        for _ in 0..dims.nx {
            w = shift.apply(&w).unwrap();
        }
        assert_eq!(w, v);
        let neg = negate_ssh(dims);
        assert_eq!(neg.apply(&neg.apply(&v).unwrap()).unwrap(), v);
    }

    #[test]
    fn catalogue_constructor_errors() {
        let rect = GridDims::new(1, 4, 5).unwrap();
        assert!(matches!(transpose_xy(rect), Err(Error::Shape(_))));
        assert!(known_symmetries(rect).iter().all(|r| r.name() != Some("transpose_xy")));
        assert!(matches!(scale_gf(rect, 0.0), Err(Error::Parameter(_))));
        let names: Vec<_> = known_symmetries(GridDims::discovery())
            .iter()
            .map(|r| r.name().unwrap().to_string())
            .collect();
        assert_eq!(
            names,
            [
                "negate_ssh",
                "negate_y",
                "negate_x",
                "negate_G",
                "negate_F",
                "scale_gf(2)",
                "translate(0,1)",
                "translate(1,0)",
                "translate(3,2)",
                "transpose_xy"
            ]
        );
    }

    #[test]
    fn catalogue_holds_under_cyclic_kernel() {
        let dims = GridDims::new(2, 6, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let s = random_state(dims, &SamplingRanges::default(), &mut rng).unwrap();
            let e = energy_cyclic(&s).unwrap().0;
            for rel in known_symmetries(dims) {
                let moved = StateVector::unflatten(&rel.apply(&s.flatten()).unwrap(), dims).unwrap();
                let e2 = energy_cyclic(&moved).unwrap().0;
                for (a, b) in e.iter().zip(&e2) {
                    assert!((a - b).abs() < 1e-12 * a.abs(), "{}", rel.name().unwrap());
                }
            }
        }
    }

    #[test]
    fn serialization_roundtrip_catalogue() {
        let dims = GridDims::new(1, 4, 4).unwrap();
        for rel in known_symmetries(dims) {
            let text = rel.to_json();
            let back = AffineRelation::from_json(&text).unwrap();
            assert_eq!(back, rel);
        }
        let dense = negate_ssh(dims).to_dense();
        assert_eq!(AffineRelation::from_json(&dense.to_json()).unwrap(), dense);
    }

    #[test]
    fn malformed_documents_are_format_errors() {
        let dims = GridDims::new(1, 3, 3).unwrap();
        let dense = AffineRelation::identity_in(Space::Dense, dims);
        let mut value = dense.to_json_value();
        value["alpha"] = json!(vec![1.0; 13 * 13 - 1]);
        let err = AffineRelation::from_json_value(&value).unwrap_err();
        assert!(matches!(err, Error::Format { ref location, .. } if location == "alpha"), "{err}");

        let mut value = dense.to_json_value();
        value["schema"] = json!("morphoseek-relation/9");
        assert!(matches!(AffineRelation::from_json_value(&value), Err(Error::Format { .. })));

        let mut value = negate_ssh(dims).to_json_value();
        value["alpha"]["ssh_perm"] = json!([0, 0, 2, 3, 4, 5, 6, 7, 8]);
        let err = AffineRelation::from_json_value(&value).unwrap_err();
        assert!(matches!(err, Error::Format { ref location, .. } if location == "alpha.ssh_perm"), "{err}");

        let mut value = negate_ssh(dims).to_json_value();
        value["alpha"]["param_scale"] = json!([1.0, 0.0, 1.0, 1.0]);
        assert!(AffineRelation::from_json_value(&value).is_err());

        let text = negate_ssh(dims).to_json();
        let err = AffineRelation::from_json(&text[..text.len() / 2]).unwrap_err();
        assert!(matches!(err, Error::Format { ref location, .. } if location.starts_with("line")));
    }

    #[test]
    fn structured_spaces_match_dense_oracle() {
        let dims = GridDims::new(1, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut rels = known_symmetries(dims);
        let mut diag = scale_ssh(dims, -0.75);
        diag.beta.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
        rels.push(diag);
        for rel in &rels {
            for _ in 0..10 {
                let v: Vec<f64> = (0..dims.state_len()).map(|_| rng.random_range(-3.0..3.0)).collect();
                assert_eq!(rel.apply(&v).unwrap(), dense_oracle(rel, &v));
                assert_eq!(rel.apply(&v).unwrap(), rel.to_dense().apply(&v).unwrap());
            }
        }
    }

    #[test]
    fn coefficient_indexing_covers_alpha_then_beta() {
        let dims = GridDims::new(1, 3, 3).unwrap();
        let mut rel = negate_ssh(dims);
        assert_eq!(rel.coefficient_count(), 9 + 4 + 13);
        *rel.coefficient_mut(9 + 2) = 7.0;
        *rel.coefficient_mut(13) = 0.25;
        assert_eq!(rel.coefficient(11), 7.0);
        assert_eq!(rel.beta[0], 0.25);
        if let Alpha::SignedPermScale { param_scale, .. } = &rel.alpha {
            assert_eq!(param_scale[2], 7.0);
        }
    }
}
