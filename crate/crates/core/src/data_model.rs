//! Datasets, key data, per-vertex variables and scalar fields.
//!
//! A [`Dataset`] is loaded from a JSON manifest with inline numeric arrays and
//! is immutable afterwards. Key data carry their variables per vertex; dataset
//! level [`ScalarField`]s are only used as sources for density sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = [f64; 3];

/// Default number of histogram bins requested by the colormap editor.
pub const DEFAULT_HISTOGRAM_BINS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Points,
    Lines,
    Surface,
}

impl GeometryKind {
    pub const ALL: [GeometryKind; 3] = [
        GeometryKind::Points,
        GeometryKind::Lines,
        GeometryKind::Surface,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GeometryKind::Points => "points",
            GeometryKind::Lines => "lines",
            GeometryKind::Surface => "surface",
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Scalar,
    Vector,
}

impl VariableKind {
    pub const ALL: [VariableKind; 2] = [VariableKind::Scalar, VariableKind::Vector];

    pub fn as_str(self) -> &'static str {
        match self {
            VariableKind::Scalar => "scalar",
            VariableKind::Vector => "vector",
        }
    }
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VariableValues {
    Scalar(Vec<f64>),
    Vector(Vec<Vec3>),
}

impl VariableValues {
    pub fn len(&self) -> usize {
        match self {
            VariableValues::Scalar(v) => v.len(),
            VariableValues::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableArray {
    pub name: String,
    pub values: VariableValues,
    pub declared_range: Option<(f64, f64)>,
}

impl VariableArray {
    pub fn scalar(name: impl Into<String>, values: Vec<f64>) -> Self {
        VariableArray {
            name: name.into(),
            values: VariableValues::Scalar(values),
            declared_range: None,
        }
    }

    pub fn vector(name: impl Into<String>, values: Vec<Vec3>) -> Self {
        VariableArray {
            name: name.into(),
            values: VariableValues::Vector(values),
            declared_range: None,
        }
    }

    pub fn with_range(mut self, min: f64, max: f64) -> Self {
        self.declared_range = Some((min, max));
        self
    }

    pub fn kind(&self) -> VariableKind {
        match self.values {
            VariableValues::Scalar(_) => VariableKind::Scalar,
            VariableValues::Vector(_) => VariableKind::Vector,
        }
    }

    pub fn scalars(&self) -> Option<&[f64]> {
        match &self.values {
            VariableValues::Scalar(v) => Some(v),
            VariableValues::Vector(_) => None,
        }
    }

    pub fn vectors(&self) -> Option<&[Vec3]> {
        match &self.values {
            VariableValues::Vector(v) => Some(v),
            VariableValues::Scalar(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl Bounds {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Bounds { min, max }
    }

    pub fn unit() -> Self {
        Bounds {
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }

    pub fn extent(&self) -> Vec3 {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn center(&self) -> Vec3 {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        ]
    }

    pub fn diagonal(&self) -> f64 {
        let e = self.extent();
        (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()
    }

    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn is_finite(&self) -> bool {
        self.min
            .iter()
            .chain(self.max.iter())
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyData {
    pub name: String,
    pub kind: GeometryKind,
    pub vertices: Vec<Vec3>,
    /// Polylines as vertex index sequences (lines only).
    pub lines: Vec<Vec<u32>>,
    /// Triangles as vertex index triples (surfaces only).
    pub triangles: Vec<[u32; 3]>,
    pub variables: BTreeMap<String, VariableArray>,
}

impl KeyData {
    pub fn points(name: impl Into<String>, vertices: Vec<Vec3>) -> Self {
        KeyData {
            name: name.into(),
            kind: GeometryKind::Points,
            vertices,
            lines: Vec::new(),
            triangles: Vec::new(),
            variables: BTreeMap::new(),
        }
    }

    pub fn polylines(name: impl Into<String>, vertices: Vec<Vec3>, lines: Vec<Vec<u32>>) -> Self {
        KeyData {
            kind: GeometryKind::Lines,
            lines,
            ..KeyData::points(name, vertices)
        }
    }

    pub fn surface(name: impl Into<String>, vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        KeyData {
            kind: GeometryKind::Surface,
            triangles,
            ..KeyData::points(name, vertices)
        }
    }

    pub fn with_variable(mut self, var: VariableArray) -> Self {
        self.variables.insert(var.name.clone(), var);
        self
    }

    pub fn variable(&self, name: &str) -> Option<&VariableArray> {
        self.variables.get(name)
    }

    pub fn variable_kind(&self, name: &str) -> Option<VariableKind> {
        self.variables.get(name).map(VariableArray::kind)
    }

    fn scalar_values(&self, var: &str) -> Result<(&VariableArray, &[f64]), VariableError> {
        let array = self
            .variables
            .get(var)
            .ok_or_else(|| VariableError::Unknown {
                key_data: self.name.clone(),
                variable: var.to_string(),
            })?;
        let values = array.scalars().ok_or_else(|| VariableError::NotScalar {
            key_data: self.name.clone(),
            variable: var.to_string(),
        })?;
        Ok((array, values))
    }

    /// Declared range when present, otherwise min/max over the values.
    /// An empty variable yields `(0, 0)`.
    pub fn variable_range(&self, var: &str) -> Result<(f64, f64), VariableError> {
        let (array, values) = self.scalar_values(var)?;
        if let Some(range) = array.declared_range {
            return Ok(range);
        }
        if values.is_empty() {
            return Ok((0.0, 0.0));
        }
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Ok((lo, hi))
    }

    /// Counts of the variable's values in `bins` equal-width bins spanning
    /// [`variable_range`](Self::variable_range). Values at the maximum land in
    /// the last bin; values outside a declared range are clamped into the end
    /// bins so the counts always sum to the vertex count. A degenerate range
    /// puts everything in bin 0.
    pub fn compute_histogram(&self, var: &str, bins: usize) -> Result<Vec<u64>, VariableError> {
        if bins == 0 {
            return Err(VariableError::ZeroBins);
        }
        let (min, max) = self.variable_range(var)?;
        let (_, values) = self.scalar_values(var)?;
        let mut counts = vec![0u64; bins];
        let width = max - min;
        for &v in values {
            let bin = if width > 0.0 {
                let scaled = (v - min) / width * bins as f64;
                if scaled <= 0.0 {
                    0
                } else {
                    (scaled.floor() as usize).min(bins - 1)
                }
            } else {
                0
            };
            counts[bin] += 1;
        }
        Ok(counts)
    }

    pub fn bounds(&self) -> Option<Bounds> {
        let first = *self.vertices.first()?;
        let mut b = Bounds::new(first, first);
        for v in &self.vertices {
            for i in 0..3 {
                b.min[i] = b.min[i].min(v[i]);
                b.max[i] = b.max[i].max(v[i]);
            }
        }
        Some(b)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariableError {
    #[error("key data \"{key_data}\" has no variable \"{variable}\"")]
    Unknown { key_data: String, variable: String },
    #[error("variable \"{variable}\" on key data \"{key_data}\" is not scalar")]
    NotScalar { key_data: String, variable: String },
    #[error("histogram needs at least one bin")]
    ZeroBins,
}

/// Regular grid of scalars, x-fastest ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub name: String,
    pub dims: [usize; 3],
    pub origin: Vec3,
    pub spacing: Vec3,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn value_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    pub fn bounds(&self) -> Bounds {
        let mut max = self.origin;
        for axis in 0..3 {
            max[axis] += self.dims[axis].saturating_sub(1) as f64 * self.spacing[axis];
        }
        Bounds::new(self.origin, max)
    }

    /// Trilinear interpolation; positions outside the grid clamp to the
    /// boundary cell.
    pub fn sample(&self, p: Vec3) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for axis in 0..3 {
            let n = self.dims[axis];
            if n <= 1 {
                continue;
            }
            let g = ((p[axis] - self.origin[axis]) / self.spacing[axis]).clamp(0.0, (n - 1) as f64);
            let cell = (g.floor() as usize).min(n - 2);
            base[axis] = cell;
            frac[axis] = g - cell as f64;
        }
        let step = |axis: usize| usize::from(self.dims[axis] > 1);
        let (sx, sy, sz) = (step(0), step(1), step(2));
        let [i, j, k] = base;
        let [fx, fy, fz] = frac;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(self.value_at(i, j, k), self.value_at(i + sx, j, k), fx);
        let c10 = lerp(
            self.value_at(i, j + sy, k),
            self.value_at(i + sx, j + sy, k),
            fx,
        );
        let c01 = lerp(
            self.value_at(i, j, k + sz),
            self.value_at(i + sx, j, k + sz),
            fx,
        );
        let c11 = lerp(
            self.value_at(i, j + sy, k + sz),
            self.value_at(i + sx, j + sy, k + sz),
            fx,
        );
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub bounds: Bounds,
    pub key_data: Vec<KeyData>,
    pub fields: Vec<ScalarField>,
}

impl Dataset {
    pub fn key_data(&self, name: &str) -> Option<&KeyData> {
        self.key_data.iter().find(|kd| kd.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&ScalarField> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// True when some key data carries a variable of this name and kind.
    pub fn has_variable(&self, name: &str, kind: VariableKind) -> bool {
        self.key_data
            .iter()
            .any(|kd| kd.variable_kind(name) == Some(kind))
    }

    /// Every invariant violation in the dataset, in manifest order.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !self.bounds.is_finite() || (0..3).any(|i| self.bounds.min[i] > self.bounds.max[i]) {
            out.push(Violation::new(
                "bounds",
                "bounds must be finite with min <= max",
            ));
        }
        for (idx, kd) in self.key_data.iter().enumerate() {
            if self.key_data[..idx]
                .iter()
                .any(|other| other.name == kd.name)
            {
                out.push(Violation::new(
                    format!("key_data \"{}\"", kd.name),
                    "duplicate key data name",
                ));
            }
            validate_key_data(kd, &self.bounds, &mut out);
        }
        for (idx, field) in self.fields.iter().enumerate() {
            let loc = format!("field \"{}\"", field.name);
            if self.fields[..idx]
                .iter()
                .any(|other| other.name == field.name)
            {
                out.push(Violation::new(loc.clone(), "duplicate field name"));
            }
            if field.dims.contains(&0) {
                out.push(Violation::new(loc.clone(), "dims must all be >= 1"));
            }
            let expected = field.dims.iter().product::<usize>();
            if field.values.len() != expected {
                out.push(Violation::new(
                    loc.clone(),
                    format!(
                        "has {} values, dims require {}",
                        field.values.len(),
                        expected
                    ),
                ));
            }
            if field.spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                out.push(Violation::new(
                    loc.clone(),
                    "spacing must be finite and positive",
                ));
            }
            if field.origin.iter().any(|o| !o.is_finite()) {
                out.push(Violation::new(loc.clone(), "origin must be finite"));
            }
            if let Some(i) = field.values.iter().position(|v| !v.is_finite()) {
                out.push(Violation::new(
                    format!("{loc} value {i}"),
                    "value is not finite",
                ));
            }
        }
        out
    }
}

fn validate_key_data(kd: &KeyData, bounds: &Bounds, out: &mut Vec<Violation>) {
    let loc = format!("key_data \"{}\"", kd.name);
    let n = kd.vertices.len();
    for (i, v) in kd.vertices.iter().enumerate() {
        if v.iter().any(|c| !c.is_finite()) {
            out.push(Violation::new(
                format!("{loc} vertex {i}"),
                "position is not finite",
            ));
        } else if !bounds.contains(*v) {
            out.push(Violation::new(
                format!("{loc} vertex {i}"),
                "position lies outside dataset bounds",
            ));
        }
    }
    match kd.kind {
        GeometryKind::Points => {
            if !kd.lines.is_empty() || !kd.triangles.is_empty() {
                out.push(Violation::new(
                    loc.clone(),
                    "points key data must not carry topology",
                ));
            }
        }
        GeometryKind::Lines => {
            if !kd.triangles.is_empty() {
                out.push(Violation::new(
                    loc.clone(),
                    "lines key data must not carry triangles",
                ));
            }
            for (li, line) in kd.lines.iter().enumerate() {
                if line.len() < 2 {
                    out.push(Violation::new(
                        format!("{loc} polyline {li}"),
                        "polyline needs at least 2 vertices",
                    ));
                }
                if let Some(&bad) = line.iter().find(|&&idx| idx as usize >= n) {
                    out.push(Violation::new(
                        format!("{loc} polyline {li}"),
                        format!("index {bad} out of range for {n} vertices"),
                    ));
                }
            }
        }
        GeometryKind::Surface => {
            if !kd.lines.is_empty() {
                out.push(Violation::new(
                    loc.clone(),
                    "surface key data must not carry polylines",
                ));
            }
            for (ti, tri) in kd.triangles.iter().enumerate() {
                if let Some(&bad) = tri.iter().find(|&&idx| idx as usize >= n) {
                    out.push(Violation::new(
                        format!("{loc} triangle {ti}"),
                        format!("index {bad} out of range for {n} vertices"),
                    ));
                } else if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                    out.push(Violation::new(
                        format!("{loc} triangle {ti}"),
                        "triangle indices must be distinct",
                    ));
                }
            }
        }
    }
    for (name, var) in &kd.variables {
        let vloc = format!("{loc} variable \"{name}\"");
        if var.values.len() != n {
            out.push(Violation::new(
                vloc.clone(),
                format!("has {} values for {} vertices", var.values.len(), n),
            ));
        }
        match &var.values {
            VariableValues::Scalar(values) => {
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    out.push(Violation::new(
                        format!("{vloc} value {i}"),
                        "value is not finite",
                    ));
                }
            }
            VariableValues::Vector(values) => {
                if let Some(i) = values.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
                    out.push(Violation::new(
                        format!("{vloc} value {i}"),
                        "value is not finite",
                    ));
                }
                if var.declared_range.is_some() {
                    out.push(Violation::new(
                        vloc.clone(),
                        "range is only allowed on scalar variables",
                    ));
                }
            }
        }
        if let Some((lo, hi)) = var.declared_range {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                out.push(Violation::new(
                    vloc.clone(),
                    format!("declared range [{lo}, {hi}] is invalid"),
                ));
            }
        }
    }
}

/// One located invariant violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub location: String,
    pub message: String,
}

impl Violation {
    pub fn new(location: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse dataset {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("dataset {path} is invalid: {}", join_violations(.violations))]
    Invalid {
        path: PathBuf,
        violations: Vec<Violation>,
    },
}

// Wire form of the manifest.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    name: String,
    bounds: Bounds,
    #[serde(default)]
    key_data: Vec<ManifestKeyData>,
    #[serde(default)]
    fields: Vec<ManifestField>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestKeyData {
    name: String,
    kind: GeometryKind,
    vertices: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lines: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    triangles: Option<Vec<Vec<u32>>>,
    #[serde(default)]
    variables: BTreeMap<String, ManifestVariable>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestVariable {
    kind: VariableKind,
    values: Vec<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestField {
    name: String,
    dims: [usize; 3],
    origin: Vec3,
    spacing: Vec3,
    values: Vec<f64>,
}

impl ManifestFile {
    fn into_dataset(self) -> Result<Dataset, Vec<Violation>> {
        let mut shape_errors = Vec::new();
        let key_data = self
            .key_data
            .into_iter()
            .map(|raw| {
                let loc = format!("key_data \"{}\"", raw.name);
                let triangles = raw
                    .triangles
                    .unwrap_or_default()
                    .into_iter()
                    .enumerate()
                    .filter_map(|(i, t)| match <[u32; 3]>::try_from(t.as_slice()) {
                        Ok(tri) => Some(tri),
                        Err(_) => {
                            shape_errors.push(Violation::new(
                                format!("{loc} triangle {i}"),
                                format!("triangle has {} indices, expected 3", t.len()),
                            ));
                            None
                        }
                    })
                    .collect();
                let mut variables = BTreeMap::new();
                for (name, var) in raw.variables {
                    let vloc = format!("{loc} variable \"{name}\"");
                    let values = match var.kind {
                        VariableKind::Scalar => var
                            .values
                            .iter()
                            .map(|v| v.as_f64())
                            .collect::<Option<Vec<_>>>()
                            .map(VariableValues::Scalar),
                        VariableKind::Vector => var
                            .values
                            .iter()
                            .map(|v| serde_json::from_value::<Vec3>(v.clone()).ok())
                            .collect::<Option<Vec<_>>>()
                            .map(VariableValues::Vector),
                    };
                    match values {
                        Some(values) => {
                            variables.insert(
                                name.clone(),
                                VariableArray {
                                    name,
                                    values,
                                    declared_range: var.range.map(|[a, b]| (a, b)),
                                },
                            );
                        }
                        None => shape_errors.push(Violation::new(
                            vloc,
                            format!("values do not match declared kind {}", var.kind),
                        )),
                    }
                }
                KeyData {
                    name: raw.name,
                    kind: raw.kind,
                    vertices: raw.vertices,
                    lines: raw.lines.unwrap_or_default(),
                    triangles,
                    variables,
                }
            })
            .collect();
        let fields = self
            .fields
            .into_iter()
            .map(|f| ScalarField {
                name: f.name,
                dims: f.dims,
                origin: f.origin,
                spacing: f.spacing,
                values: f.values,
            })
            .collect();
        let dataset = Dataset {
            name: self.name,
            bounds: self.bounds,
            key_data,
            fields,
        };
        shape_errors.extend(dataset.validate());
        if shape_errors.is_empty() {
            Ok(dataset)
        } else {
            Err(shape_errors)
        }
    }

    fn from_dataset(ds: &Dataset) -> Self {
        ManifestFile {
            name: ds.name.clone(),
            bounds: ds.bounds,
            key_data: ds
                .key_data
                .iter()
                .map(|kd| ManifestKeyData {
                    name: kd.name.clone(),
                    kind: kd.kind,
                    vertices: kd.vertices.clone(),
                    lines: (kd.kind == GeometryKind::Lines).then(|| kd.lines.clone()),
                    triangles: (kd.kind == GeometryKind::Surface)
                        .then(|| kd.triangles.iter().map(|t| t.to_vec()).collect()),
                    variables: kd
                        .variables
                        .iter()
                        .map(|(name, var)| {
                            let values = match &var.values {
                                VariableValues::Scalar(v) => {
                                    v.iter().map(|x| serde_json::json!(x)).collect()
                                }
                                VariableValues::Vector(v) => {
                                    v.iter().map(|x| serde_json::json!(x)).collect()
                                }
                            };
                            (
                                name.clone(),
                                ManifestVariable {
                                    kind: var.kind(),
                                    values,
                                    range: var.declared_range.map(|(a, b)| [a, b]),
                                },
                            )
                        })
                        .collect(),
                })
                .collect(),
            fields: ds
                .fields
                .iter()
                .map(|f| ManifestField {
                    name: f.name.clone(),
                    dims: f.dims,
                    origin: f.origin,
                    spacing: f.spacing,
                    values: f.values.clone(),
                })
                .collect(),
        }
    }
}

/// Parses and validates a manifest held in memory.
pub fn parse_dataset(text: &str, path: &Path) -> Result<Dataset, DatasetError> {
    let raw: ManifestFile = serde_json::from_str(text).map_err(|source| DatasetError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    raw.into_dataset()
        .map_err(|violations| DatasetError::Invalid {
            path: path.to_path_buf(),
            violations,
        })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, path)
}

/// Serializes a dataset back to the manifest format.
pub fn dataset_to_json(ds: &Dataset) -> String {
    serde_json::to_string(&ManifestFile::from_dataset(ds))
        .expect("manifest serialization cannot fail")
}
