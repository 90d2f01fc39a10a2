//! Plates, their typed slots, and data impressions.
//!
//! A plate is a rendering algorithm with a fixed slot signature. A data
//! impression is one instance of a plate with pieces assigned to some of its
//! slots. Every assignment goes through [`validate_assignment`]; a piece that
//! does not fit its slot is refused and the impression is left unchanged.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asset_library::AssetKind;
use crate::colormap::Colormap;
use crate::data_model::{GeometryKind, VariableKind};

pub const KEY_DATA_SLOT: &str = "key_data";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlateType {
    Glyphs,
    Ribbons,
    Surface,
}

impl PlateType {
    pub const ALL: [PlateType; 3] = [PlateType::Glyphs, PlateType::Ribbons, PlateType::Surface];

    pub fn as_str(self) -> &'static str {
        match self {
            PlateType::Glyphs => "glyphs",
            PlateType::Ribbons => "ribbons",
            PlateType::Surface => "surface",
        }
    }

    pub fn spec(self) -> PlateSpec {
        plate_registry()
            .into_iter()
            .find(|p| p.plate_type == self)
            .expect("every plate type is registered")
    }
}

impl fmt::Display for PlateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Number,
    NumberPair,
}

/// What a slot accepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "piece", rename_all = "snake_case")]
pub enum SlotKind {
    KeyData { geometry: Vec<GeometryKind> },
    Variable { variable_kind: VariableKind },
    Asset { asset_kind: AssetKind },
    Primitive { primitive: PrimitiveKind },
}

/// Value a slot takes while unassigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "default", content = "value", rename_all = "snake_case")]
pub enum SlotDefault {
    /// Required slot; no default.
    Required,
    /// Optional data input that is simply absent.
    Unassigned,
    SphereGlyph,
    GrayColormap,
    WhiteTexture,
    Number(f64),
    Pair([f64; 2]),
}

impl fmt::Display for SlotDefault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotDefault::Required => f.write_str("[required]"),
            SlotDefault::Unassigned => f.write_str("[none]"),
            SlotDefault::SphereGlyph => f.write_str("[sphere]"),
            SlotDefault::GrayColormap => f.write_str("[gray]"),
            SlotDefault::WhiteTexture => f.write_str("[white]"),
            SlotDefault::Number(x) => write!(f, "[{x}]"),
            SlotDefault::Pair([a, b]) => write!(f, "[{a}, {b}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub accepts: SlotKind,
    pub required: bool,
    pub default: SlotDefault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateSpec {
    pub plate_type: PlateType,
    pub slots: Vec<SlotSpec>,
}

impl PlateSpec {
    pub fn slot(&self, name: &str) -> Option<&SlotSpec> {
        self.slots.iter().find(|s| s.name == name)
    }
}

fn slot(name: &str, accepts: SlotKind, default: SlotDefault) -> SlotSpec {
    SlotSpec {
        name: name.to_string(),
        required: default == SlotDefault::Required,
        accepts,
        default,
    }
}

fn key_data(geometry: &[GeometryKind]) -> SlotSpec {
    slot(
        KEY_DATA_SLOT,
        SlotKind::KeyData {
            geometry: geometry.to_vec(),
        },
        SlotDefault::Required,
    )
}

fn variable(name: &str, variable_kind: VariableKind) -> SlotSpec {
    slot(
        name,
        SlotKind::Variable { variable_kind },
        SlotDefault::Unassigned,
    )
}

fn asset(name: &str, asset_kind: AssetKind, default: SlotDefault) -> SlotSpec {
    slot(name, SlotKind::Asset { asset_kind }, default)
}

fn number(name: &str, value: f64) -> SlotSpec {
    slot(
        name,
        SlotKind::Primitive {
            primitive: PrimitiveKind::Number,
        },
        SlotDefault::Number(value),
    )
}

fn pair(name: &str, value: [f64; 2]) -> SlotSpec {
    slot(
        name,
        SlotKind::Primitive {
            primitive: PrimitiveKind::NumberPair,
        },
        SlotDefault::Pair(value),
    )
}

/// All plates, in a fixed order. New plates are added here.
pub fn plate_registry() -> Vec<PlateSpec> {
    use GeometryKind::*;
    use VariableKind::*;
    vec![
        PlateSpec {
            plate_type: PlateType::Glyphs,
            slots: vec![
                // glyphs may also be strung along line vertices
                key_data(&[Points, Lines]),
                asset("glyph", AssetKind::Glyph, SlotDefault::SphereGlyph),
                variable("color_variable", Scalar),
                asset("colormap", AssetKind::Colormap, SlotDefault::GrayColormap),
                variable("size_variable", Scalar),
                pair("size_range", [0.02, 0.05]),
                variable("orientation_variable", Vector),
                number("uniform_size", 0.03),
            ],
        },
        PlateSpec {
            plate_type: PlateType::Ribbons,
            slots: vec![
                key_data(&[Lines]),
                asset(
                    "line_texture",
                    AssetKind::LineTexture,
                    SlotDefault::WhiteTexture,
                ),
                variable("color_variable", Scalar),
                asset("colormap", AssetKind::Colormap, SlotDefault::GrayColormap),
                number("width", 0.01),
                number("texture_repeat", 1.0),
            ],
        },
        PlateSpec {
            plate_type: PlateType::Surface,
            slots: vec![
                key_data(&[Surface]),
                asset("texture", AssetKind::Texture, SlotDefault::WhiteTexture),
                variable("color_variable", Scalar),
                asset("colormap", AssetKind::Colormap, SlotDefault::GrayColormap),
                number("texture_scale", 1.0),
            ],
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrimitiveValue {
    Number(f64),
    Pair([f64; 2]),
}

/// A puzzle piece: something that can be dropped into a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PieceRef {
    KeyData {
        dataset: String,
        name: String,
    },
    Variable {
        dataset: String,
        name: String,
        variable_kind: VariableKind,
    },
    Asset {
        id: String,
    },
    Primitive {
        value: PrimitiveValue,
    },
}

impl PieceRef {
    pub fn key_data(dataset: impl Into<String>, name: impl Into<String>) -> Self {
        PieceRef::KeyData {
            dataset: dataset.into(),
            name: name.into(),
        }
    }

    pub fn scalar(dataset: impl Into<String>, name: impl Into<String>) -> Self {
        PieceRef::Variable {
            dataset: dataset.into(),
            name: name.into(),
            variable_kind: VariableKind::Scalar,
        }
    }

    pub fn vector(dataset: impl Into<String>, name: impl Into<String>) -> Self {
        PieceRef::Variable {
            dataset: dataset.into(),
            name: name.into(),
            variable_kind: VariableKind::Vector,
        }
    }

    pub fn asset(id: impl Into<String>) -> Self {
        PieceRef::Asset { id: id.into() }
    }

    pub fn number(x: f64) -> Self {
        PieceRef::Primitive {
            value: PrimitiveValue::Number(x),
        }
    }

    pub fn pair(a: f64, b: f64) -> Self {
        PieceRef::Primitive {
            value: PrimitiveValue::Pair([a, b]),
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            PieceRef::KeyData { .. } => "key_data",
            PieceRef::Variable { .. } => "variable",
            PieceRef::Asset { .. } => "asset",
            PieceRef::Primitive { .. } => "primitive",
        }
    }
}

/// Looks up the things pieces refer to.
pub trait PieceResolver {
    fn dataset_name(&self) -> &str;
    fn key_data_kind(&self, name: &str) -> Option<GeometryKind>;
    /// Kind of `var` on key data `key_data`, if present.
    fn key_data_variable(&self, key_data: &str, var: &str) -> Option<VariableKind>;
    /// Whether any key data in the dataset carries `var` with this kind.
    fn variable_exists(&self, var: &str, kind: VariableKind) -> bool;
    /// Kind of an asset available in the session palette.
    fn asset_kind(&self, id: &str) -> Option<AssetKind>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefusalCode {
    KindMismatch,
    SubtypeMismatch,
    GeometryMismatch,
    Unresolved,
    VariableMismatch,
    InvalidPrimitive,
    UnknownImpression,
    UnknownSlot,
    Colormap,
    Asset,
    Parse,
    Protocol,
    Render,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("{message}")]
pub struct Refusal {
    pub code: RefusalCode,
    pub message: String,
}

impl Refusal {
    pub fn new(code: RefusalCode, message: impl Into<String>) -> Self {
        Refusal {
            code,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssignError {
    #[error("plate {plate} has no slot \"{slot}\"")]
    UnknownSlot { plate: PlateType, slot: String },
    #[error("refused: {0}")]
    Refused(Refusal),
}

impl AssignError {
    pub fn into_refusal(self) -> Refusal {
        match self {
            AssignError::Refused(r) => r,
            e @ AssignError::UnknownSlot { .. } => {
                Refusal::new(RefusalCode::UnknownSlot, e.to_string())
            }
        }
    }
}

fn refuse(code: RefusalCode, message: impl Into<String>) -> AssignError {
    AssignError::Refused(Refusal::new(code, message))
}

/// One visual layer: a plate plus its assignments and panel state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataImpression {
    pub id: String,
    pub plate: PlateType,
    #[serde(default)]
    pub assignments: BTreeMap<String, PieceRef>,
    pub panel_position: [f64; 2],
    pub visible: bool,
    pub collapsed: bool,
    /// Colormaps edited in place, keyed by slot. Replacing the slot's piece
    /// discards the edit.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub colormap_edits: BTreeMap<String, Colormap>,
}

impl DataImpression {
    pub fn new(id: impl Into<String>, plate: PlateType) -> Self {
        DataImpression {
            id: id.into(),
            plate,
            assignments: BTreeMap::new(),
            panel_position: [0.0, 0.0],
            visible: true,
            collapsed: false,
            colormap_edits: BTreeMap::new(),
        }
    }

    pub fn piece(&self, slot: &str) -> Option<&PieceRef> {
        self.assignments.get(slot)
    }

    /// Name of the registered key data, if any.
    pub fn key_data_name(&self) -> Option<&str> {
        match self.assignments.get(KEY_DATA_SLOT) {
            Some(PieceRef::KeyData { name, .. }) => Some(name),
            _ => None,
        }
    }

    fn slot_spec(&self, slot: &str) -> Result<SlotSpec, AssignError> {
        self.plate
            .spec()
            .slot(slot)
            .cloned()
            .ok_or_else(|| AssignError::UnknownSlot {
                plate: self.plate,
                slot: slot.to_string(),
            })
    }
}

/// Checks whether `piece` may go into `slot` of `imp`.
pub fn validate_assignment(
    imp: &DataImpression,
    slot: &str,
    piece: &PieceRef,
    resolver: &dyn PieceResolver,
) -> Result<(), AssignError> {
    let spec = imp.slot_spec(slot)?;
    check_piece(&spec, piece, imp.key_data_name(), resolver)
}

fn check_piece(
    spec: &SlotSpec,
    piece: &PieceRef,
    registered: Option<&str>,
    resolver: &dyn PieceResolver,
) -> Result<(), AssignError> {
    let slot = &spec.name;
    match (&spec.accepts, piece) {
        (SlotKind::KeyData { geometry }, PieceRef::KeyData { dataset, name }) => {
            check_dataset(dataset, resolver)?;
            let kind = resolver.key_data_kind(name).ok_or_else(|| {
                refuse(
                    RefusalCode::Unresolved,
                    format!("unknown key data \"{name}\""),
                )
            })?;
            if !geometry.contains(&kind) {
                return Err(refuse(
                    RefusalCode::SubtypeMismatch,
                    format!("slot \"{slot}\" does not accept {kind} key data"),
                ));
            }
            Ok(())
        }
        (
            SlotKind::Variable { variable_kind },
            PieceRef::Variable {
                dataset,
                name,
                variable_kind: got,
            },
        ) => {
            if got != variable_kind {
                return Err(refuse(
                    RefusalCode::SubtypeMismatch,
                    format!("slot \"{slot}\" takes a {variable_kind} variable, not a {got} one"),
                ));
            }
            check_dataset(dataset, resolver)?;
            match registered {
                Some(kd) => match resolver.key_data_variable(kd, name) {
                    Some(k) if k == *variable_kind => Ok(()),
                    Some(k) => Err(refuse(
                        RefusalCode::VariableMismatch,
                        format!("\"{name}\" is a {k} variable on key data \"{kd}\""),
                    )),
                    None => Err(refuse(
                        RefusalCode::VariableMismatch,
                        format!("key data \"{kd}\" has no variable \"{name}\""),
                    )),
                },
                None if resolver.variable_exists(name, *variable_kind) => Ok(()),
                None => Err(refuse(
                    RefusalCode::Unresolved,
                    format!("unknown {variable_kind} variable \"{name}\""),
                )),
            }
        }
        (SlotKind::Asset { asset_kind }, PieceRef::Asset { id }) => {
            let kind = resolver.asset_kind(id).ok_or_else(|| {
                refuse(
                    RefusalCode::Unresolved,
                    format!("asset \"{id}\" is not in the palette"),
                )
            })?;
            if kind != *asset_kind {
                return Err(refuse(
                    RefusalCode::KindMismatch,
                    format!("slot \"{slot}\" takes a {asset_kind}, not a {kind}"),
                ));
            }
            Ok(())
        }
        (SlotKind::Primitive { primitive }, PieceRef::Primitive { value }) => {
            match (primitive, value) {
                (PrimitiveKind::Number, PrimitiveValue::Number(x)) => {
                    if x.is_finite() && *x > 0.0 {
                        Ok(())
                    } else {
                        Err(refuse(
                            RefusalCode::InvalidPrimitive,
                            format!("\"{slot}\" must be a positive number, got {x}"),
                        ))
                    }
                }
                (PrimitiveKind::NumberPair, PrimitiveValue::Pair([a, b])) => {
                    if a.is_finite() && b.is_finite() && *a > 0.0 && a <= b {
                        Ok(())
                    } else {
                        Err(refuse(
                        RefusalCode::InvalidPrimitive,
                        format!("\"{slot}\" must be a positive range with min <= max, got [{a}, {b}]"),
                    ))
                    }
                }
                _ => Err(refuse(
                    RefusalCode::SubtypeMismatch,
                    format!("slot \"{slot}\" takes a {primitive:?} value"),
                )),
            }
        }
        (accepts, piece) => Err(refuse(
            RefusalCode::KindMismatch,
            format!(
                "slot \"{slot}\" takes {}, not a {} piece",
                accepts_label(accepts),
                piece.class()
            ),
        )),
    }
}

fn accepts_label(kind: &SlotKind) -> &'static str {
    match kind {
        SlotKind::KeyData { .. } => "key data",
        SlotKind::Variable { .. } => "a variable",
        SlotKind::Asset { .. } => "a visual asset",
        SlotKind::Primitive { .. } => "a value",
    }
}

fn check_dataset(dataset: &str, resolver: &dyn PieceResolver) -> Result<(), AssignError> {
    if dataset == resolver.dataset_name() {
        Ok(())
    } else {
        Err(refuse(
            RefusalCode::Unresolved,
            format!("piece belongs to dataset \"{dataset}\""),
        ))
    }
}

/// Outcome of a successful assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assigned {
    pub impression: DataImpression,
    /// Variable slots cleared because the new key data lacks them.
    pub detached: Vec<String>,
}

/// Puts `piece` into `slot`, replacing any previous piece. Registering key
/// data re-checks the variable slots and detaches the ones that no longer fit.
pub fn assign(
    imp: &DataImpression,
    slot: &str,
    piece: PieceRef,
    resolver: &dyn PieceResolver,
) -> Result<Assigned, AssignError> {
    validate_assignment(imp, slot, &piece, resolver)?;
    let mut out = imp.clone();
    out.colormap_edits.remove(slot);
    out.assignments.insert(slot.to_string(), piece);
    let detached = if slot == KEY_DATA_SLOT {
        detach_unfit_variables(&mut out, resolver)
    } else {
        Vec::new()
    };
    Ok(Assigned {
        impression: out,
        detached,
    })
}

fn detach_unfit_variables(imp: &mut DataImpression, resolver: &dyn PieceResolver) -> Vec<String> {
    let spec = imp.plate.spec();
    let registered = imp.key_data_name().map(str::to_string);
    let mut detached = Vec::new();
    for s in &spec.slots {
        if !matches!(s.accepts, SlotKind::Variable { .. }) {
            continue;
        }
        if let Some(piece) = imp.assignments.get(&s.name) {
            if check_piece(s, piece, registered.as_deref(), resolver).is_err() {
                detached.push(s.name.clone());
            }
        }
    }
    for name in &detached {
        imp.assignments.remove(name);
    }
    detached
}

/// Re-registers the impression to different key data of the same geometry,
/// keeping every visual setting and each variable the new key data carries.
pub fn swap_key_data(
    imp: &DataImpression,
    new_key_data: PieceRef,
    resolver: &dyn PieceResolver,
) -> Result<Assigned, AssignError> {
    validate_assignment(imp, KEY_DATA_SLOT, &new_key_data, resolver)?;
    if let (Some(current), PieceRef::KeyData { name, .. }) = (imp.key_data_name(), &new_key_data) {
        let old = resolver.key_data_kind(current);
        let new = resolver.key_data_kind(name);
        if old.is_some() && old != new {
            return Err(refuse(
                RefusalCode::GeometryMismatch,
                format!(
                    "cannot swap {} key data \"{current}\" for {} key data \"{name}\"",
                    old.map_or("?", GeometryKind::as_str),
                    new.map_or("?", GeometryKind::as_str)
                ),
            ));
        }
    }
    assign(imp, KEY_DATA_SLOT, new_key_data, resolver)
}

/// Clears a slot.
pub fn remove_piece(imp: &DataImpression, slot: &str) -> Result<DataImpression, AssignError> {
    imp.slot_spec(slot)?;
    let mut out = imp.clone();
    out.assignments.remove(slot);
    out.colormap_edits.remove(slot);
    Ok(out)
}

/// A slot after defaults are applied.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Piece(PieceRef),
    Default(SlotDefault),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("impression \"{0}\" is not renderable: no key data registered")]
pub struct NotRenderable(pub String);

/// Every slot of an impression resolved to its piece or default.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveConfig {
    pub plate: PlateType,
    pub key_data: String,
    pub slots: BTreeMap<String, Resolved>,
    pub colormap_edits: BTreeMap<String, Colormap>,
}

impl EffectiveConfig {
    pub fn number(&self, slot: &str) -> Option<f64> {
        match self.slots.get(slot)? {
            Resolved::Piece(PieceRef::Primitive {
                value: PrimitiveValue::Number(x),
            }) => Some(*x),
            Resolved::Default(SlotDefault::Number(x)) => Some(*x),
            _ => None,
        }
    }

    pub fn pair(&self, slot: &str) -> Option<[f64; 2]> {
        match self.slots.get(slot)? {
            Resolved::Piece(PieceRef::Primitive {
                value: PrimitiveValue::Pair(p),
            }) => Some(*p),
            Resolved::Default(SlotDefault::Pair(p)) => Some(*p),
            _ => None,
        }
    }

    pub fn variable(&self, slot: &str) -> Option<&str> {
        match self.slots.get(slot)? {
            Resolved::Piece(PieceRef::Variable { name, .. }) => Some(name),
            _ => None,
        }
    }

    /// Assigned asset id; `None` means the built-in default.
    pub fn asset(&self, slot: &str) -> Option<&str> {
        match self.slots.get(slot)? {
            Resolved::Piece(PieceRef::Asset { id }) => Some(id),
            _ => None,
        }
    }

    pub fn colormap_edit(&self, slot: &str) -> Option<&Colormap> {
        self.colormap_edits.get(slot)
    }
}

pub fn effective_config(imp: &DataImpression) -> Result<EffectiveConfig, NotRenderable> {
    let key_data = imp
        .key_data_name()
        .ok_or_else(|| NotRenderable(imp.id.clone()))?
        .to_string();
    let slots = imp
        .plate
        .spec()
        .slots
        .into_iter()
        .map(|s| {
            let resolved = match imp.assignments.get(&s.name) {
                Some(p) => Resolved::Piece(p.clone()),
                None => Resolved::Default(s.default.clone()),
            };
            (s.name, resolved)
        })
        .collect();
    Ok(EffectiveConfig {
        plate: imp.plate,
        key_data,
        slots,
        colormap_edits: imp.colormap_edits.clone(),
    })
}


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    fn glyphs() -> DataImpression {
        DataImpression::new("leafy", PlateType::Glyphs)
    }

    fn registered(plate: PlateType, kd: &str) -> DataImpression {
        assign(
            &DataImpression::new("imp", plate),
            KEY_DATA_SLOT,
            PieceRef::key_data("gulf", kd),
            &gulf(),
        )
        .unwrap()
        .impression
    }

    #[test]
    fn registry_shape() {
        let reg = plate_registry();
        assert_eq!(
            reg.iter().map(|p| p.plate_type).collect::<Vec<_>>(),
            PlateType::ALL
        );
        for plate in &reg {
            let key_slots: Vec<_> = plate
                .slots
                .iter()
                .filter(|s| matches!(s.accepts, SlotKind::KeyData { .. }))
                .collect();
            assert_eq!(key_slots.len(), 1);
            assert!(key_slots[0].required);
            for s in &plate.slots {
                assert_eq!(s.required, s.default == SlotDefault::Required, "{}", s.name);
            }
            let mut names: Vec<_> = plate.slots.iter().map(|s| &s.name).collect();
            names.dedup();
            assert_eq!(names.len(), plate.slots.len());
        }
        let ribbons = PlateType::Ribbons.spec();
        assert!(!ribbons.slots.iter().any(|s| s.accepts
            == SlotKind::Asset {
                asset_kind: AssetKind::Glyph
            }));
        let glyph = PlateType::Glyphs.spec();
        assert_eq!(
            glyph.slot("size_range").unwrap().default,
            SlotDefault::Pair([0.02, 0.05])
        );
        assert_eq!(
            glyph.slot("uniform_size").unwrap().default,
            SlotDefault::Number(0.03)
        );
        assert_eq!(
            ribbons.slot("width").unwrap().default,
            SlotDefault::Number(0.01)
        );
        assert_eq!(
            ribbons.slot("texture_repeat").unwrap().default,
            SlotDefault::Number(1.0)
        );
        assert_eq!(
            PlateType::Surface
                .spec()
                .slot("texture_scale")
                .unwrap()
                .default,
            SlotDefault::Number(1.0)
        );
    }

    #[test]
    fn primitive_slots_have_defaults() {
        for plate in plate_registry() {
            for s in plate
                .slots
                .iter()
                .filter(|s| matches!(s.accepts, SlotKind::Primitive { .. }))
            {
                assert!(matches!(
                    s.default,
                    SlotDefault::Number(_) | SlotDefault::Pair(_)
                ));
            }
        }
    }

    #[test]
    fn registering_points_key_data() {
        let r = gulf();
        assert_eq!(
            validate_assignment(
                &glyphs(),
                KEY_DATA_SLOT,
                &PieceRef::key_data("gulf", "chlorophyll-points"),
                &r
            ),
            Ok(())
        );
    }

    #[test]
    fn glyph_into_colormap_slot_refused() {
        let err = validate_assignment(&glyphs(), "colormap", &PieceRef::asset("drum"), &gulf())
            .unwrap_err();
        assert!(matches!(
            err,
            AssignError::Refused(Refusal {
                code: RefusalCode::KindMismatch,
                ..
            })
        ));
    }

    #[test]
    fn vector_into_scalar_slot_refused() {
        let imp = registered(PlateType::Glyphs, "chlorophyll-points");
        let err = validate_assignment(
            &imp,
            "color_variable",
            &PieceRef::vector("gulf", "Current"),
            &gulf(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            AssignError::Refused(Refusal {
                code: RefusalCode::SubtypeMismatch,
                ..
            })
        ));
        let err = validate_assignment(
            &imp,
            "orientation_variable",
            &PieceRef::scalar("gulf", "Salinity"),
            &gulf(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            AssignError::Refused(Refusal {
                code: RefusalCode::SubtypeMismatch,
                ..
            })
        ));
    }

    #[test]
    fn unknown_slot_is_distinct_from_refusal() {
        let err =
            validate_assignment(&glyphs(), "wings", &PieceRef::number(1.0), &gulf()).unwrap_err();
        assert!(matches!(err, AssignError::UnknownSlot { .. }));
    }

    #[test]
    fn variables_must_live_on_registered_key_data() {
        let imp = registered(PlateType::Glyphs, "nitrate-points");
        let err = validate_assignment(
            &imp,
            "color_variable",
            &PieceRef::scalar("gulf", "Salinity"),
            &gulf(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            AssignError::Refused(Refusal {
                code: RefusalCode::VariableMismatch,
                ..
            })
        ));
        let err = validate_assignment(
            &imp,
            "color_variable",
            &PieceRef::scalar("other", "Temperature"),
            &gulf(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            AssignError::Refused(Refusal {
                code: RefusalCode::Unresolved,
                ..
            })
        ));
    }

    #[test]
    fn primitives_must_be_positive_and_finite() {
        let r = gulf();
        let imp = glyphs();
        assert!(validate_assignment(&imp, "uniform_size", &PieceRef::number(0.1), &r).is_ok());
        for bad in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(validate_assignment(&imp, "uniform_size", &PieceRef::number(bad), &r).is_err());
        }
        assert!(validate_assignment(&imp, "size_range", &PieceRef::pair(0.01, 0.1), &r).is_ok());
        assert!(validate_assignment(&imp, "size_range", &PieceRef::pair(0.1, 0.01), &r).is_err());
        assert!(validate_assignment(&imp, "size_range", &PieceRef::number(0.1), &r).is_err());
        assert!(validate_assignment(&imp, "uniform_size", &PieceRef::pair(0.1, 0.2), &r).is_err());
    }

    #[test]
    fn reassigning_color_variable_touches_only_that_slot() {
        let r = gulf();
        let imp = registered(PlateType::Glyphs, "chlorophyll-points");
        let imp = assign(
            &imp,
            "color_variable",
            PieceRef::scalar("gulf", "Salinity"),
            &r,
        )
        .unwrap()
        .impression;
        let imp = assign(&imp, "glyph", PieceRef::asset("drum"), &r)
            .unwrap()
            .impression;
        let after = assign(
            &imp,
            "color_variable",
            PieceRef::scalar("gulf", "Temperature"),
            &r,
        )
        .unwrap()
        .impression;
        assert_eq!(
            after.piece("color_variable"),
            Some(&PieceRef::scalar("gulf", "Temperature"))
        );
        let mut before = imp.assignments.clone();
        let mut now = after.assignments.clone();
        before.remove("color_variable");
        now.remove("color_variable");
        assert_eq!(before, now);
    }

    #[test]
    fn occupied_slot_is_replaced() {
        let r = gulf();
        let imp = assign(&glyphs(), "glyph", PieceRef::asset("drum"), &r)
            .unwrap()
            .impression;
        let imp = assign(&imp, "glyph", PieceRef::asset("leaf"), &r)
            .unwrap()
            .impression;
        assert_eq!(imp.piece("glyph"), Some(&PieceRef::asset("leaf")));
        assert_eq!(imp.assignments.len(), 1);
    }

    #[test]
    fn assets_do_not_need_key_data() {
        let r = gulf();
        let imp = assign(&glyphs(), "colormap", PieceRef::asset("ocean"), &r)
            .unwrap()
            .impression;
        assert!(imp.key_data_name().is_none());
        assert_eq!(imp.piece("colormap"), Some(&PieceRef::asset("ocean")));
    }

    #[test]
    fn pending_variables_detach_when_key_data_lacks_them() {
        let r = gulf();
        let imp = assign(
            &glyphs(),
            "size_variable",
            PieceRef::scalar("gulf", "Salinity"),
            &r,
        )
        .unwrap()
        .impression;
        let imp = assign(
            &imp,
            "color_variable",
            PieceRef::scalar("gulf", "Temperature"),
            &r,
        )
        .unwrap()
        .impression;
        let out = assign(
            &imp,
            KEY_DATA_SLOT,
            PieceRef::key_data("gulf", "nitrate-points"),
            &r,
        )
        .unwrap();
        assert_eq!(out.detached, vec!["size_variable".to_string()]);
        assert!(out.impression.piece("color_variable").is_some());
    }

    #[test]
    fn swap_keeps_shared_variables_and_visuals() {
        let r = gulf();
        let mut imp = registered(PlateType::Glyphs, "chlorophyll-points");
        for (slot, piece) in [
            ("color_variable", PieceRef::scalar("gulf", "Temperature")),
            ("size_variable", PieceRef::scalar("gulf", "Salinity")),
            ("glyph", PieceRef::asset("leaf")),
            ("colormap", PieceRef::asset("ocean")),
            ("uniform_size", PieceRef::number(0.05)),
        ] {
            imp = assign(&imp, slot, piece, &r).unwrap().impression;
        }
        let out = swap_key_data(&imp, PieceRef::key_data("gulf", "nitrate-points"), &r).unwrap();
        assert_eq!(out.detached, vec!["size_variable".to_string()]);
        let new = &out.impression;
        assert_eq!(new.key_data_name(), Some("nitrate-points"));
        assert_eq!(
            new.piece("color_variable"),
            Some(&PieceRef::scalar("gulf", "Temperature"))
        );
        assert_eq!(new.piece("glyph"), Some(&PieceRef::asset("leaf")));
        assert_eq!(new.piece("colormap"), Some(&PieceRef::asset("ocean")));
        assert_eq!(new.piece("uniform_size"), Some(&PieceRef::number(0.05)));
        for (slot, piece) in &new.assignments {
            assert!(validate_assignment(new, slot, piece, &r).is_ok());
        }
    }

    #[test]
    fn swap_to_other_geometry_refused() {
        let r = gulf();
        let imp = registered(PlateType::Glyphs, "chlorophyll-points");
        let err = swap_key_data(&imp, PieceRef::key_data("gulf", "currents"), &r).unwrap_err();
        assert!(matches!(
            err,
            AssignError::Refused(Refusal {
                code: RefusalCode::GeometryMismatch,
                ..
            })
        ));
        let ribbon = registered(PlateType::Ribbons, "currents");
        assert!(swap_key_data(&ribbon, PieceRef::key_data("gulf", "seafloor"), &r).is_err());
    }

    #[test]
    fn effective_config_defaults() {
        let imp = registered(PlateType::Glyphs, "chlorophyll-points");
        let cfg = effective_config(&imp).unwrap();
        assert_eq!(cfg.key_data, "chlorophyll-points");
        assert_eq!(
            cfg.slots["glyph"],
            Resolved::Default(SlotDefault::SphereGlyph)
        );
        assert_eq!(
            cfg.slots["colormap"],
            Resolved::Default(SlotDefault::GrayColormap)
        );
        assert_eq!(cfg.number("uniform_size"), Some(0.03));
        assert_eq!(cfg.pair("size_range"), Some([0.02, 0.05]));
        assert_eq!(cfg.variable("color_variable"), None);
        assert_eq!(cfg.asset("glyph"), None);
    }

    #[test]
    fn effective_config_passes_assignments_through() {
        let r = gulf();
        let mut imp = registered(PlateType::Ribbons, "currents");
        for (slot, piece) in [
            ("line_texture", PieceRef::asset("stripe")),
            ("color_variable", PieceRef::scalar("gulf", "Speed")),
            ("colormap", PieceRef::asset("ocean")),
            ("width", PieceRef::number(0.02)),
            ("texture_repeat", PieceRef::number(4.0)),
        ] {
            imp = assign(&imp, slot, piece, &r).unwrap().impression;
        }
        let cfg = effective_config(&imp).unwrap();
        assert!(cfg.slots.values().all(|s| matches!(s, Resolved::Piece(_))));
        assert_eq!(cfg.asset("line_texture"), Some("stripe"));
        assert_eq!(cfg.number("width"), Some(0.02));
        assert_eq!(cfg.variable("color_variable"), Some("Speed"));
    }

    #[test]
    fn no_key_data_is_not_renderable() {
        assert_eq!(
            effective_config(&glyphs()),
            Err(NotRenderable("leafy".into()))
        );
    }

    #[test]
    fn assign_agrees_with_validate() {
        let r = gulf();
        let pieces = [
            PieceRef::key_data("gulf", "chlorophyll-points"),
            PieceRef::key_data("gulf", "currents"),
            PieceRef::key_data("gulf", "seafloor"),
            PieceRef::scalar("gulf", "Temperature"),
            PieceRef::vector("gulf", "Current"),
            PieceRef::asset("drum"),
            PieceRef::asset("ocean"),
            PieceRef::asset("stripe"),
            PieceRef::asset("paper"),
            PieceRef::number(0.5),
            PieceRef::pair(0.1, 0.2),
        ];
        for plate in PlateType::ALL {
            let imp = DataImpression::new("x", plate);
            for s in plate.spec().slots {
                for p in &pieces {
                    let v = validate_assignment(&imp, &s.name, p, &r);
                    let a = assign(&imp, &s.name, p.clone(), &r);
                    assert_eq!(v.is_ok(), a.is_ok(), "{plate} {} {p:?}", s.name);
                    if let Ok(a) = a {
                        assert_eq!(a.impression.piece(&s.name), Some(p));
                    }
                }
            }
        }
    }

    #[test]
    fn piece_json_shape() {
        let json = serde_json::to_value(PieceRef::scalar("gulf", "Temperature")).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"kind": "variable", "dataset": "gulf", "name": "Temperature", "variable_kind": "scalar"})
        );
        let back: PieceRef =
            serde_json::from_value(serde_json::json!({"kind": "primitive", "value": [0.1, 0.2]}))
                .unwrap();
        assert_eq!(back, PieceRef::pair(0.1, 0.2));
    }
}
