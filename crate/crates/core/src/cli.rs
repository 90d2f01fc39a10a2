//! Command-line entry points: `serve`, `render` and `validate`.
//!
//! Exit codes are 0 for success, 1 for load or validation failures and 2 for
//! usage errors.

use std::io::Write;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::asset_library::{load_payload, read_manifest, AssetLibrary};
use crate::composition::{check_composition, load_state, sha256_hex, Composition};
use crate::data_model::{load_dataset, parse_dataset, Dataset, DatasetError};
use crate::plate::PieceRef;
use crate::renderer::{render_composition, Camera, RenderSettings, DEFAULT_SIZE};
use crate::sync_server::{serve, Engine};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "plateink",
    version,
    about = "Serve, render and validate plate compositions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Run the sync server for design clients.
    Serve(ServeArgs),
    /// Render a saved state to a PNG file.
    Render(RenderArgs),
    /// Check a dataset manifest, state file or asset directory.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub assets: PathBuf,
    /// 0 picks a free port.
    #[arg(long)]
    pub port: u16,
    #[arg(long)]
    pub state: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub assets: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SIZE)]
    pub width: u32,
    #[arg(long, default_value_t = DEFAULT_SIZE)]
    pub height: u32,
    /// px,py,pz,lx,ly,lz,ux,uy,uz,fov
    #[arg(long, allow_hyphen_values = true)]
    pub camera: Option<String>,
    /// Rasterizer threads; output does not depend on it.
    #[arg(long, hide = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("target").required(true).multiple(false)))]
pub struct ValidateArgs {
    #[arg(long, group = "target")]
    pub dataset: Option<PathBuf>,
    #[arg(long, group = "target")]
    pub state: Option<PathBuf>,
    /// One asset directory holding a manifest.json.
    #[arg(long, group = "target")]
    pub asset: Option<PathBuf>,
    /// Asset library to check a state's palette against.
    #[arg(long, requires = "state")]
    pub assets: Option<PathBuf>,
}

/// Validation findings. Errors fail validation, warnings do not.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Report {
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for e in &self.errors {
            writeln!(out, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(out, "warning: {w}")?;
        }
        Ok(())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{rendered}");
                EXIT_OK
            };
        }
    };
    match cli.command {
        CliCommand::Serve(a) => cmd_serve(&a, out, err),
        CliCommand::Render(a) => cmd_render(&a, err),
        CliCommand::Validate(a) => {
            let report = validate(&a);
            let _ = report.write(out);
            if report.is_ok() {
                EXIT_OK
            } else {
                EXIT_INVALID
            }
        }
    }
}

fn open_inputs(
    dataset: &Path,
    assets: &Path,
    err: &mut dyn Write,
) -> Result<(Dataset, AssetLibrary), String> {
    let ds = load_dataset(dataset).map_err(|e| e.to_string())?;
    let (library, warnings) = AssetLibrary::open(assets).map_err(|e| e.to_string())?;
    for w in warnings {
        let _ = writeln!(err, "warning: asset {w}");
    }
    Ok((ds, library))
}

fn check_dataset_hash(comp: &Composition, dataset: &Path, err: &mut dyn Write) {
    if let (Some(r), Ok(bytes)) = (&comp.dataset_ref, std::fs::read(dataset)) {
        if sha256_hex(&bytes) != r.sha256 {
            let _ = writeln!(
                err,
                "warning: {} differs from the dataset the state was saved with",
                dataset.display()
            );
        }
    }
}

pub fn cmd_serve(args: &ServeArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let (ds, library) = match open_inputs(&args.dataset, &args.assets, err) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let initial = match &args.state {
        Some(path) => match load_state(path) {
            Ok(loaded) => {
                for w in &loaded.warnings {
                    let _ = writeln!(err, "warning: {w}");
                }
                check_dataset_hash(&loaded.composition, &args.dataset, err);
                loaded.composition
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INVALID;
            }
        },
        None => Composition::default(),
    };

    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start runtime: {e}");
            return EXIT_INVALID;
        }
    };
    let engine = Arc::new(Engine::new(Arc::new(ds), Arc::new(library), initial));
    runtime.block_on(async {
        let addr = SocketAddr::from((Ipv4Addr::UNSPECIFIED, args.port));
        match serve(engine, addr).await {
            Ok(handle) => {
                let _ = writeln!(out, "listening on ws://{}/ws", handle.local_addr);
                let _ = out.flush();
                handle.join().await;
                EXIT_OK
            }
            Err(e) => {
                let _ = writeln!(err, "error: cannot bind port {}: {e}", args.port);
                EXIT_INVALID
            }
        }
    })
}

pub fn cmd_render(args: &RenderArgs, err: &mut dyn Write) -> i32 {
    let camera = match &args.camera {
        Some(flag) => match Camera::parse_flag(flag, args.width, args.height) {
            Ok(c) => Some(c),
            Err(e) => {
                let _ = writeln!(err, "error: --camera: {e}");
                return EXIT_USAGE;
            }
        },
        None => None,
    };
    if args.width == 0 || args.height == 0 {
        let _ = writeln!(
            err,
            "error: image size {}x{} has zero area",
            args.width, args.height
        );
        return EXIT_USAGE;
    }
    let loaded = match load_state(&args.state) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let (ds, library) = match open_inputs(&args.dataset, &args.assets, err) {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    check_dataset_hash(&loaded.composition, &args.dataset, err);

    let settings = RenderSettings {
        threads: args.threads,
        ..RenderSettings::default()
    };
    let rendered = match render_composition(
        &loaded.composition,
        &ds,
        &library,
        camera,
        args.width,
        args.height,
        &settings,
    ) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    if !rendered.missing_assets.is_empty() {
        let _ = writeln!(
            err,
            "error: unresolvable assets: {}",
            rendered.missing_assets.join(", ")
        );
        return EXIT_INVALID;
    }
    for w in &rendered.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    if let Err(e) = std::fs::write(&args.out, &rendered.png) {
        let _ = writeln!(err, "error: cannot write {}: {e}", args.out.display());
        return EXIT_INVALID;
    }
    EXIT_OK
}

pub fn validate(args: &ValidateArgs) -> Report {
    if let Some(p) = &args.dataset {
        validate_dataset(p)
    } else if let Some(p) = &args.state {
        validate_state(p, args.assets.as_deref())
    } else if let Some(p) = &args.asset {
        validate_asset(p)
    } else {
        Report {
            errors: vec!["nothing to validate".into()],
            warnings: vec![],
        }
    }
}

pub fn validate_dataset(path: &Path) -> Report {
    let mut report = Report::default();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            report
                .errors
                .push(format!("cannot read {}: {e}", path.display()));
            return report;
        }
    };
    match parse_dataset(&text, path) {
        Ok(_) => {}
        Err(DatasetError::Invalid { violations, .. }) => {
            report
                .errors
                .extend(violations.iter().map(|v| v.to_string()));
        }
        Err(e) => report.errors.push(e.to_string()),
    }
    report
}

pub fn validate_state(path: &Path, assets: Option<&Path>) -> Report {
    let mut report = Report::default();
    let loaded = match load_state(path) {
        Ok(l) => l,
        Err(e) => {
            report.errors.push(e.to_string());
            return report;
        }
    };
    report.warnings.extend(loaded.warnings.iter().cloned());
    let library = match assets {
        Some(dir) => match AssetLibrary::open(dir) {
            Ok((lib, _)) => Some(lib),
            Err(e) => {
                report.errors.push(e.to_string());
                return report;
            }
        },
        None => None,
    };
    if let Some(lib) = &library {
        for id in &loaded.composition.palette {
            if lib.catalog().kind_of(id).is_none() {
                report
                    .warnings
                    .push(format!("palette references unknown asset id \"{id}\""));
            }
        }
    }
    if let Some(ds_path) = &loaded.dataset_path {
        match load_dataset(ds_path) {
            Ok(ds) => {
                let lib = library.unwrap_or_else(AssetLibrary::empty);
                for (imp, slot, reason) in check_composition(&loaded.composition, &ds, &lib) {
                    let is_asset = loaded
                        .composition
                        .impression(&imp)
                        .and_then(|i| i.piece(&slot))
                        .is_some_and(|p| matches!(p, PieceRef::Asset { .. }));
                    if assets.is_none() && is_asset {
                        continue;
                    }
                    report.errors.push(format!("{imp}.{slot}: {reason}"));
                }
            }
            Err(e) => report.errors.push(e.to_string()),
        }
    }
    report
}

pub fn validate_asset(dir: &Path) -> Report {
    let mut report = Report::default();
    let manifest = match read_manifest(&dir.join("manifest.json")) {
        Ok(m) => m,
        Err(e) => {
            report.errors.push(e.to_string());
            return report;
        }
    };
    let dir_name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    if manifest.id != dir_name {
        report.warnings.push(format!(
            "manifest id \"{}\" does not match directory \"{dir_name}\"",
            manifest.id
        ));
    }
    if let Err(e) = load_payload(&manifest, &dir.join(&manifest.file)) {
        report.errors.push(e.to_string());
    }
    report
}
