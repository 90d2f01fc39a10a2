//! Session state: impressions, palette and panel layout, the command loop
//! that mutates them, and the state file.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::asset_library::{default_colormap, AssetKind, AssetLibrary};
use crate::colormap::{Colormap, ColormapEdit};
use crate::data_model::{Dataset, GeometryKind, VariableKind};
use crate::plate::{
    self, DataImpression, PieceRef, PieceResolver, PlateType, PrimitiveValue, Refusal, RefusalCode,
    SlotKind,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Spacing of default panel positions for new impressions.
const PANEL_STEP: f64 = 160.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub path: String,
    pub sha256: String,
}

impl DatasetRef {
    pub fn for_file(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        Ok(DatasetRef {
            path: path.to_string_lossy().into_owned(),
            sha256: sha256_hex(&bytes),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Composition {
    pub impressions: IndexMap<String, DataImpression>,
    /// Imported asset ids in import order.
    pub palette: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_ref: Option<DatasetRef>,
    pub revision: u64,
    /// Counter behind generated impression ids.
    #[serde(default)]
    pub next_impression: u64,
}

impl Composition {
    pub fn new(dataset_ref: Option<DatasetRef>) -> Self {
        Composition {
            dataset_ref,
            ..Default::default()
        }
    }

    pub fn impression(&self, id: &str) -> Option<&DataImpression> {
        self.impressions.get(id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    CreateImpression {
        plate: PlateType,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        position: Option<[f64; 2]>,
    },
    DeleteImpression {
        impression: String,
    },
    Assign {
        impression: String,
        slot: String,
        piece: PieceRef,
    },
    RemovePiece {
        impression: String,
        slot: String,
    },
    SwapKeyData {
        impression: String,
        key_data: PieceRef,
    },
    SetPrimitive {
        impression: String,
        slot: String,
        value: PrimitiveValue,
    },
    MoveImpression {
        impression: String,
        position: [f64; 2],
    },
    SetVisibility {
        impression: String,
        visible: bool,
    },
    SetCollapsed {
        impression: String,
        collapsed: bool,
    },
    ImportAsset {
        id: String,
    },
    EditColormap {
        impression: String,
        slot: String,
        edit: ColormapEdit,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    StateChanged { revision: u64 },
    Refused { reason: Refusal },
    Warning { message: String },
}

/// What commands are checked against.
pub struct Context<'a> {
    pub dataset: &'a Dataset,
    pub library: &'a AssetLibrary,
}

/// Resolves pieces against the dataset and the composition's palette.
pub struct SessionResolver<'a> {
    pub dataset: &'a Dataset,
    pub library: &'a AssetLibrary,
    pub palette: &'a [String],
}

impl PieceResolver for SessionResolver<'_> {
    fn dataset_name(&self) -> &str {
        &self.dataset.name
    }

    fn key_data_kind(&self, name: &str) -> Option<GeometryKind> {
        self.dataset.key_data(name).map(|kd| kd.kind)
    }

    fn key_data_variable(&self, key_data: &str, var: &str) -> Option<VariableKind> {
        self.dataset.key_data(key_data)?.variable_kind(var)
    }

    fn variable_exists(&self, var: &str, kind: VariableKind) -> bool {
        self.dataset.has_variable(var, kind)
    }

    fn asset_kind(&self, id: &str) -> Option<AssetKind> {
        if self.palette.iter().any(|p| p == id) {
            self.library.catalog().kind_of(id)
        } else {
            None
        }
    }
}

fn refused(code: RefusalCode, message: impl Into<String>) -> Refusal {
    Refusal::new(code, message)
}

/// Applies one command. On success the revision goes up by one and a
/// `StateChanged` event leads the event list; on refusal the input state is
/// returned untouched.
pub fn apply_command(
    comp: &Composition,
    cmd: &Command,
    ctx: &Context<'_>,
) -> (Composition, Vec<Event>) {
    match try_apply(comp, cmd, ctx) {
        Ok((mut next, warnings)) => {
            next.revision = comp.revision + 1;
            let mut events = vec![Event::StateChanged {
                revision: next.revision,
            }];
            events.extend(
                warnings
                    .into_iter()
                    .map(|message| Event::Warning { message }),
            );
            (next, events)
        }
        Err(reason) => (comp.clone(), vec![Event::Refused { reason }]),
    }
}

fn try_apply(
    comp: &Composition,
    cmd: &Command,
    ctx: &Context<'_>,
) -> Result<(Composition, Vec<String>), Refusal> {
    let resolver = SessionResolver {
        dataset: ctx.dataset,
        library: ctx.library,
        palette: &comp.palette,
    };
    let mut next = comp.clone();
    let mut warnings = Vec::new();
    match cmd {
        Command::CreateImpression {
            plate,
            id,
            position,
        } => {
            let id = match id {
                Some(id) if id.is_empty() => {
                    return Err(refused(
                        RefusalCode::UnknownImpression,
                        "empty impression id",
                    ))
                }
                Some(id) if next.impressions.contains_key(id) => {
                    return Err(refused(
                        RefusalCode::UnknownImpression,
                        format!("impression \"{id}\" already exists"),
                    ))
                }
                Some(id) => id.clone(),
                None => loop {
                    next.next_impression += 1;
                    let candidate = format!("{}-{}", plate.as_str(), next.next_impression);
                    if !next.impressions.contains_key(&candidate) {
                        break candidate;
                    }
                },
            };
            let mut imp = DataImpression::new(id.clone(), *plate);
            imp.panel_position = match position {
                Some(p) => checked_position(*p)?,
                None => [0.0, PANEL_STEP * next.impressions.len() as f64],
            };
            next.impressions.insert(id, imp);
        }
        Command::DeleteImpression { impression } => {
            if next.impressions.shift_remove(impression).is_none() {
                return Err(unknown(impression));
            }
        }
        Command::Assign {
            impression,
            slot,
            piece,
        } => {
            let imp = lookup(&next, impression)?;
            let out =
                plate::assign(imp, slot, piece.clone(), &resolver).map_err(|e| e.into_refusal())?;
            warnings.extend(detach_warnings(impression, &out.detached));
            next.impressions[impression.as_str()] = out.impression;
        }
        Command::RemovePiece { impression, slot } => {
            let imp = lookup(&next, impression)?;
            let out = plate::remove_piece(imp, slot).map_err(|e| e.into_refusal())?;
            next.impressions[impression.as_str()] = out;
        }
        Command::SwapKeyData {
            impression,
            key_data,
        } => {
            let imp = lookup(&next, impression)?;
            let out = plate::swap_key_data(imp, key_data.clone(), &resolver)
                .map_err(|e| e.into_refusal())?;
            warnings.extend(detach_warnings(impression, &out.detached));
            next.impressions[impression.as_str()] = out.impression;
        }
        Command::SetPrimitive {
            impression,
            slot,
            value,
        } => {
            let imp = lookup(&next, impression)?;
            let piece = PieceRef::Primitive { value: *value };
            let out = plate::assign(imp, slot, piece, &resolver).map_err(|e| e.into_refusal())?;
            next.impressions[impression.as_str()] = out.impression;
        }
        Command::MoveImpression {
            impression,
            position,
        } => {
            let position = checked_position(*position)?;
            lookup_mut(&mut next, impression)?.panel_position = position;
        }
        Command::SetVisibility {
            impression,
            visible,
        } => {
            lookup_mut(&mut next, impression)?.visible = *visible;
        }
        Command::SetCollapsed {
            impression,
            collapsed,
        } => {
            lookup_mut(&mut next, impression)?.collapsed = *collapsed;
        }
        Command::ImportAsset { id } => {
            ctx.library
                .import(id)
                .map_err(|e| refused(RefusalCode::Asset, e.to_string()))?;
            if !next.palette.contains(id) {
                next.palette.push(id.clone());
            }
        }
        Command::EditColormap {
            impression,
            slot,
            edit,
        } => {
            let imp = lookup(&next, impression)?;
            let base = current_colormap(imp, slot, ctx.library)?;
            let edited = base
                .edit(edit)
                .map_err(|e| refused(RefusalCode::Colormap, e.to_string()))?;
            lookup_mut(&mut next, impression)?
                .colormap_edits
                .insert(slot.clone(), edited);
        }
    }
    Ok((next, warnings))
}

/// The colormap a slot currently shows: the edited copy, else the assigned
/// asset, else the built-in default.
pub fn current_colormap(
    imp: &DataImpression,
    slot: &str,
    library: &AssetLibrary,
) -> Result<Colormap, Refusal> {
    let spec = imp.plate.spec();
    let slot_spec = spec.slot(slot).ok_or_else(|| {
        refused(
            RefusalCode::UnknownSlot,
            format!("plate {} has no slot \"{slot}\"", imp.plate),
        )
    })?;
    if slot_spec.accepts
        != (SlotKind::Asset {
            asset_kind: AssetKind::Colormap,
        })
    {
        return Err(refused(
            RefusalCode::KindMismatch,
            format!("slot \"{slot}\" is not a colormap slot"),
        ));
    }
    if let Some(edited) = imp.colormap_edits.get(slot) {
        return Ok(edited.clone());
    }
    match imp.piece(slot) {
        Some(PieceRef::Asset { id }) => {
            let asset = library
                .import(id)
                .map_err(|e| refused(RefusalCode::Asset, e.to_string()))?;
            asset.colormap().cloned().ok_or_else(|| {
                refused(
                    RefusalCode::KindMismatch,
                    format!("asset \"{id}\" is not a colormap"),
                )
            })
        }
        _ => Ok(default_colormap()),
    }
}

fn checked_position(p: [f64; 2]) -> Result<[f64; 2], Refusal> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(p)
    } else {
        Err(refused(
            RefusalCode::InvalidPrimitive,
            "panel position must be finite",
        ))
    }
}

fn unknown(id: &str) -> Refusal {
    refused(
        RefusalCode::UnknownImpression,
        format!("no impression \"{id}\""),
    )
}

fn lookup<'c>(comp: &'c Composition, id: &str) -> Result<&'c DataImpression, Refusal> {
    comp.impressions.get(id).ok_or_else(|| unknown(id))
}

fn lookup_mut<'c>(comp: &'c mut Composition, id: &str) -> Result<&'c mut DataImpression, Refusal> {
    comp.impressions.get_mut(id).ok_or_else(|| unknown(id))
}

fn detach_warnings<'a>(
    impression: &'a str,
    detached: &'a [String],
) -> impl Iterator<Item = String> + 'a {
    detached.iter().map(move |slot| {
        format!("{impression}: detached \"{slot}\", not present on the new key data")
    })
}

/// Applies a command list in order, returning the final state.
pub fn replay<'c>(
    start: &Composition,
    commands: impl IntoIterator<Item = &'c Command>,
    ctx: &Context<'_>,
) -> Composition {
    commands
        .into_iter()
        .fold(start.clone(), |comp, cmd| apply_command(&comp, cmd, ctx).0)
}

/// Every assignment that no longer validates, as `(impression, slot, reason)`.
pub fn check_composition(
    comp: &Composition,
    dataset: &Dataset,
    library: &AssetLibrary,
) -> Vec<(String, String, String)> {
    let resolver = SessionResolver {
        dataset,
        library,
        palette: &comp.palette,
    };
    let mut out = Vec::new();
    for imp in comp.impressions.values() {
        for (slot, piece) in &imp.assignments {
            if let Err(e) = plate::validate_assignment(imp, slot, piece, &resolver) {
                out.push((imp.id.clone(), slot.clone(), e.to_string()));
            }
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum StateError {
    #[error("cannot access state file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse state file {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("state file {path} has schema_version {found}, expected {expected}")]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
}

#[derive(Serialize)]
struct StateFileOut<'a> {
    schema_version: u32,
    #[serde(flatten)]
    composition: &'a Composition,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

pub fn state_to_json(comp: &Composition) -> String {
    serde_json::to_string_pretty(&StateFileOut {
        schema_version: SCHEMA_VERSION,
        composition: comp,
    })
    .expect("state serialization cannot fail")
}

pub fn save_state(comp: &Composition, path: impl AsRef<Path>) -> Result<(), StateError> {
    let path = path.as_ref();
    std::fs::write(path, state_to_json(comp)).map_err(|source| StateError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_state(text: &str, path: &Path) -> Result<Composition, StateError> {
    let parse_err = |source| StateError::Parse {
        path: path.to_path_buf(),
        source,
    };
    let probe: VersionProbe = serde_json::from_str(text).map_err(parse_err)?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(StateError::Version {
            path: path.to_path_buf(),
            found: probe.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("schema_version");
    }
    serde_json::from_value(value).map_err(parse_err)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedState {
    pub composition: Composition,
    /// Dataset file the state points at, when present with a matching hash.
    pub dataset_path: Option<PathBuf>,
    pub warnings: Vec<String>,
}

impl LoadedState {
    pub fn dataset_available(&self) -> bool {
        self.dataset_path.is_some()
    }
}

/// Reads a state file. A missing or changed dataset is a warning, not an
/// error; the impressions then stay unrenderable until a dataset is supplied.
pub fn load_state(path: impl AsRef<Path>) -> Result<LoadedState, StateError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| StateError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let composition = parse_state(&text, path)?;
    let mut warnings = Vec::new();
    let mut dataset_path = None;
    if let Some(r) = &composition.dataset_ref {
        let resolved = resolve_relative(path, &r.path);
        match std::fs::read(&resolved) {
            Ok(bytes) if sha256_hex(&bytes) == r.sha256 => dataset_path = Some(resolved),
            Ok(_) => warnings.push(format!(
                "dataset missing: {} has changed since the state was saved",
                resolved.display()
            )),
            Err(_) => warnings.push(format!("dataset missing: {} not found", resolved.display())),
        }
        if dataset_path.is_none() {
            for id in composition.impressions.keys() {
                warnings.push(format!(
                    "impression \"{id}\" is not renderable without its dataset"
                ));
            }
        }
    }
    Ok(LoadedState {
        composition,
        dataset_path,
        warnings,
    })
}

/// Relative paths in a state file are relative to the file's directory.
pub fn resolve_relative(state_path: &Path, target: &str) -> PathBuf {
    let target = Path::new(target);
    if target.is_absolute() {
        target.to_path_buf()
    } else {
        state_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(target)
    }
}
