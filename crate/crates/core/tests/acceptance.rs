//! Primary acceptance criteria. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line, even when all pass.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plateink::asset_library::AssetLibrary;
use plateink::colormap::{Colormap, ColormapEdit, ControlPoint};
use plateink::composition::{
    apply_command, load_state, replay, save_state, Command, Composition, Context, Event,
};
use plateink::data_model::ScalarField;
use plateink::demo;
use plateink::plate::{PieceRef, PlateType, PrimitiveValue, RefusalCode};
use plateink::renderer::build_scene;
use plateink::sampling::{sample_density, SamplerConfig};
use plateink::sync_server::{serve, ClientMessage, Engine, ServerMessage};

use common::{open_demo, path_str, ws, Demo};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok_events(events: &[Event]) -> bool {
    matches!(events.first(), Some(Event::StateChanged { .. }))
}

fn refusal(events: &[Event]) -> Option<RefusalCode> {
    events.iter().find_map(|e| match e {
        Event::Refused { reason } => Some(reason.code),
        _ => None,
    })
}

fn apply_all(
    mut comp: Composition,
    cmds: &[Command],
    ctx: &Context<'_>,
) -> Result<Composition, String> {
    for cmd in cmds {
        let (next, events) = apply_command(&comp, cmd, ctx);
        if !ok_events(&events) {
            return Err(format!("{cmd:?} refused: {events:?}"));
        }
        comp = next;
    }
    Ok(comp)
}

// Typed-slot matrix.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    PointsKd,
    LinesKd,
    SurfaceKd,
    Scalar,
    Vector,
    GlyphAsset,
    ColormapAsset,
    LineTextureAsset,
    TextureAsset,
    Number,
    Pair,
}

const PIECES: [Piece; 11] = [
    Piece::PointsKd,
    Piece::LinesKd,
    Piece::SurfaceKd,
    Piece::Scalar,
    Piece::Vector,
    Piece::GlyphAsset,
    Piece::ColormapAsset,
    Piece::LineTextureAsset,
    Piece::TextureAsset,
    Piece::Number,
    Piece::Pair,
];

fn piece_ref(p: Piece) -> PieceRef {
    let ds = demo::DATASET_NAME;
    match p {
        Piece::PointsKd => PieceRef::key_data(ds, demo::CHLOROPHYLL_POINTS),
        Piece::LinesKd => PieceRef::key_data(ds, demo::LINES),
        Piece::SurfaceKd => PieceRef::key_data(ds, demo::SURFACE),
        Piece::Scalar => PieceRef::scalar(ds, "Temperature"),
        Piece::Vector => PieceRef::vector(ds, "Current"),
        Piece::GlyphAsset => PieceRef::asset("drum"),
        Piece::ColormapAsset => PieceRef::asset("ocean"),
        Piece::LineTextureAsset => PieceRef::asset("stroke-1"),
        Piece::TextureAsset => PieceRef::asset("paper"),
        Piece::Number => PieceRef::number(0.5),
        Piece::Pair => PieceRef::pair(0.1, 0.2),
    }
}

/// Which pieces each slot takes, written out by hand.
fn slot_oracle() -> Vec<(PlateType, &'static str, Vec<Piece>)> {
    use Piece::*;
    use PlateType::*;
    vec![
        (Glyphs, "key_data", vec![PointsKd, LinesKd]),
        (Glyphs, "glyph", vec![GlyphAsset]),
        (Glyphs, "color_variable", vec![Scalar]),
        (Glyphs, "colormap", vec![ColormapAsset]),
        (Glyphs, "size_variable", vec![Scalar]),
        (Glyphs, "size_range", vec![Pair]),
        (Glyphs, "orientation_variable", vec![Vector]),
        (Glyphs, "uniform_size", vec![Number]),
        (Ribbons, "key_data", vec![LinesKd]),
        (Ribbons, "line_texture", vec![LineTextureAsset]),
        (Ribbons, "color_variable", vec![Scalar]),
        (Ribbons, "colormap", vec![ColormapAsset]),
        (Ribbons, "width", vec![Number]),
        (Ribbons, "texture_repeat", vec![Number]),
        (Surface, "key_data", vec![SurfaceKd]),
        (Surface, "texture", vec![TextureAsset]),
        (Surface, "color_variable", vec![Scalar]),
        (Surface, "colormap", vec![ColormapAsset]),
        (Surface, "texture_scale", vec![Number]),
    ]
}

fn typed_slot_matrix(d: &Demo) -> Outcome {
    let ctx = Context {
        dataset: &d.dataset,
        library: &d.library,
    };
    let imports: Vec<Command> = d
        .library
        .catalog()
        .descriptors()
        .into_iter()
        .map(|a| Command::ImportAsset { id: a.id })
        .collect();
    let base = apply_all(Composition::default(), &imports, &ctx)?;
    let oracle = slot_oracle();

    for plate in PlateType::ALL {
        let spec = plate.spec();
        let registered: Vec<&str> = spec.slots.iter().map(|s| s.name.as_str()).collect();
        let expected: Vec<&str> = oracle
            .iter()
            .filter(|(p, _, _)| *p == plate)
            .map(|(_, s, _)| *s)
            .collect();
        ensure!(
            registered == expected,
            "{plate} slots {registered:?} differ from {expected:?}"
        );
    }

    let mut cells = 0;
    for (plate, slot, accepted) in &oracle {
        for piece in PIECES {
            let create = Command::CreateImpression {
                plate: *plate,
                id: Some("m".into()),
                position: None,
            };
            let (fresh, _) = apply_command(&base, &create, &ctx);
            let assign = Command::Assign {
                impression: "m".into(),
                slot: slot.to_string(),
                piece: piece_ref(piece),
            };
            let (after, events) = apply_command(&fresh, &assign, &ctx);
            let want = accepted.contains(&piece);
            let got = ok_events(&events);
            ensure!(
                got == want,
                "{plate}.{slot} <- {piece:?}: expected ok={want}, events {events:?}"
            );
            if !got {
                ensure!(
                    after == fresh,
                    "refused {plate}.{slot} <- {piece:?} changed state"
                );
            }
            cells += 1;
        }
    }
    ensure!(cells == 19 * PIECES.len(), "asserted {cells} cells");

    let on_glyph = |slot: &str, piece: Piece| {
        let create = Command::CreateImpression {
            plate: PlateType::Glyphs,
            id: Some("g".into()),
            position: None,
        };
        let (fresh, _) = apply_command(&base, &create, &ctx);
        let cmd = Command::Assign {
            impression: "g".into(),
            slot: slot.into(),
            piece: piece_ref(piece),
        };
        refusal(&apply_command(&fresh, &cmd, &ctx).1)
    };
    ensure!(
        on_glyph("colormap", Piece::GlyphAsset) == Some(RefusalCode::KindMismatch),
        "glyph asset into colormap"
    );
    ensure!(
        on_glyph("color_variable", Piece::Vector) == Some(RefusalCode::SubtypeMismatch),
        "vector into scalar slot"
    );
    ensure!(
        on_glyph("orientation_variable", Piece::Scalar) == Some(RefusalCode::SubtypeMismatch),
        "scalar into vector slot"
    );
    Ok(format!("{cells} cells"))
}

// Color variable swap.

fn color_swap(d: &Demo) -> Outcome {
    let start = Instant::now();
    let ctx = Context {
        dataset: &d.dataset,
        library: &d.library,
    };
    let (palette, failed) = d.library.palette_for(&d.state.palette);
    ensure!(failed.is_empty(), "palette failures {failed:?}");
    let imp = demo::GLYPH_IMPRESSION;
    ensure!(
        d.state
            .impression(imp)
            .and_then(|i| i.piece("color_variable"))
            == Some(&PieceRef::scalar(demo::DATASET_NAME, "Salinity")),
        "demo glyphs are not colored by Salinity"
    );
    let before = build_scene(&d.state, &d.dataset, &palette);
    let swap = Command::Assign {
        impression: imp.into(),
        slot: "color_variable".into(),
        piece: PieceRef::scalar(demo::DATASET_NAME, "Temperature"),
    };
    let (after_state, events) = apply_command(&d.state, &swap, &ctx);
    ensure!(ok_events(&events), "swap refused: {events:?}");
    let after = build_scene(&after_state, &d.dataset, &palette);

    ensure!(
        before.batches.len() == after.batches.len(),
        "batch count changed"
    );
    let mut changed_colors = 0;
    for (b, a) in before.batches.iter().zip(&after.batches) {
        ensure!(b.impression == a.impression, "batch order changed");
        ensure!(
            b.geometry_bytes() == a.geometry_bytes(),
            "geometry bytes of {} changed",
            b.impression
        );
        if b.impression == imp {
            ensure!(b.colors.len() == a.colors.len(), "color count changed");
            changed_colors = b
                .colors
                .iter()
                .zip(&a.colors)
                .filter(|(x, y)| x != y)
                .count();
        } else {
            ensure!(b.colors == a.colors, "colors of {} changed", b.impression);
        }
    }
    ensure!(changed_colors >= 1, "no instance color changed");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "{changed_colors} vertex colors changed, geometry identical, {:.0} ms",
        elapsed.as_secs_f64() * 1e3
    ))
}

// Glyphs along the ribbon lines.

fn glyphs_on_lines(d: &Demo) -> Outcome {
    let ctx = Context {
        dataset: &d.dataset,
        library: &d.library,
    };
    let ribbons = d
        .state
        .impression(demo::RIBBON_IMPRESSION)
        .ok_or("demo has no ribbon impression")?;
    let clay = "clay-lines";
    let mut comp = apply_all(
        d.state.clone(),
        &[
            Command::ImportAsset {
                id: "long-clay".into(),
            },
            Command::CreateImpression {
                plate: PlateType::Glyphs,
                id: Some(clay.into()),
                position: None,
            },
            Command::Assign {
                impression: clay.into(),
                slot: "glyph".into(),
                piece: PieceRef::asset("long-clay"),
            },
        ],
        &ctx,
    )?;
    let moved = ["key_data", "color_variable", "colormap"];
    for slot in moved {
        let piece = ribbons
            .piece(slot)
            .ok_or(format!("ribbons have no {slot}"))?
            .clone();
        let cmd = Command::Assign {
            impression: clay.into(),
            slot: slot.into(),
            piece,
        };
        let (next, events) = apply_command(&comp, &cmd, &ctx);
        ensure!(ok_events(&events), "moving {slot} refused: {events:?}");
        comp = next;
    }
    ensure!(
        comp.impression(demo::RIBBON_IMPRESSION) == Some(ribbons),
        "ribbon impression changed"
    );
    let (palette, _) = d.library.palette_for(&comp.palette);
    let scene = build_scene(&comp, &d.dataset, &palette);
    let glyphs = scene
        .batches
        .iter()
        .find(|b| b.impression == clay)
        .ok_or("no glyph batch")?;
    let line_vertices = d
        .dataset
        .key_data(demo::LINES)
        .ok_or("no line key data")?
        .vertices
        .len();
    ensure!(
        glyphs.instance_count == line_vertices,
        "{} glyph instances for {line_vertices} line vertices",
        glyphs.instance_count
    );
    ensure!(
        scene
            .batches
            .iter()
            .any(|b| b.impression == demo::RIBBON_IMPRESSION),
        "ribbons missing from scene"
    );
    Ok(format!(
        "{} assignments moved, {line_vertices} instances",
        moved.len()
    ))
}

// Density sampling.

fn density_sampling() -> Outcome {
    let n = 200;
    let values = (0..2 * 2)
        .flat_map(|_| (0..n).map(|i| if i < n / 2 { 2.0 } else { 1.0 }))
        .collect();
    let field = ScalarField {
        name: "halves".into(),
        dims: [n, 2, 2],
        origin: [0.0; 3],
        spacing: [1.0 / (n - 1) as f64, 1.0, 1.0],
        values,
    };
    let cfg = SamplerConfig::new(9000, 20240501);
    let first = sample_density(&field, &cfg, &[]).map_err(|e| e.to_string())?;
    let second = sample_density(&field, &cfg, &[]).map_err(|e| e.to_string())?;
    let pts = &first.key_data.vertices;
    ensure!(pts.len() == 9000, "{} points", pts.len());
    let left = pts.iter().filter(|p| p[0] < 0.5).count() as f64;
    let ratio = left / (pts.len() as f64 - left);
    ensure!((ratio / 2.0 - 1.0).abs() <= 0.10, "ratio {ratio:.4}");
    let bits = |v: &[[f64; 3]]| {
        v.iter()
            .flat_map(|p| p.map(f64::to_bits))
            .collect::<Vec<u64>>()
    };
    ensure!(
        bits(pts) == bits(&second.key_data.vertices),
        "repeated run differs"
    );
    Ok(format!("ratio {ratio:.4}, repeat bit-identical"))
}

// Colormaps.

fn check_invariants(c: &Colormap) -> Result<(), String> {
    let p = c.points();
    ensure!(p.len() >= 2, "{} points", p.len());
    ensure!(
        p[0].t == 0.0 && p[p.len() - 1].t == 1.0,
        "endpoints not pinned: {p:?}"
    );
    ensure!(
        p.iter().all(|q| (0.0..=1.0).contains(&q.t)),
        "t outside [0,1]: {p:?}"
    );
    ensure!(p.windows(2).all(|w| w[0].t <= w[1].t), "unsorted: {p:?}");
    Ok(())
}

fn colormap_criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rgb = |rng: &mut ChaCha8Rng| [rng.gen::<u8>(), rng.gen::<u8>(), rng.gen::<u8>()];

    for _ in 0..200 {
        let k = rng.gen_range(0..6);
        let mut ts: Vec<f64> = (0..k)
            .map(|_| rng.gen_range(1..1000) as f64 / 1000.0)
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let mut points = vec![ControlPoint::new(0.0, rgb(&mut rng))];
        points.extend(ts.iter().map(|&t| ControlPoint::new(t, rgb(&mut rng))));
        points.push(ControlPoint::new(1.0, rgb(&mut rng)));
        let cmap = Colormap::from_points(points.clone()).map_err(|e| e.to_string())?;
        for p in &points {
            ensure!(
                cmap.apply(p.t, (0.0, 1.0)) == p.rgb,
                "apply at t={} gave {:?}",
                p.t,
                cmap.apply(p.t, (0.0, 1.0))
            );
        }
    }

    let bw = Colormap::from_points(vec![
        ControlPoint::new(0.0, [0, 0, 0]),
        ControlPoint::new(1.0, [255, 255, 255]),
    ])
    .map_err(|e| e.to_string())?;
    ensure!(
        bw.apply(5.0, (0.0, 10.0)) == [128, 128, 128],
        "midpoint {:?}",
        bw.apply(5.0, (0.0, 10.0))
    );

    let mut rejected = 0;
    for _ in 0..1000 {
        let mut cmap = bw.clone();
        for _ in 0..rng.gen_range(1..30) {
            let len = cmap.len();
            let edit = match rng.gen_range(0..3) {
                0 => ColormapEdit::AddPoint {
                    t: rng.gen_range(-0.2..1.2),
                    rgb: rgb(&mut rng),
                },
                1 => ColormapEdit::RemovePoint {
                    index: rng.gen_range(0..len + 1),
                },
                _ => ColormapEdit::MovePoint {
                    index: rng.gen_range(0..len + 1),
                    t: rng.gen_range(-0.2..1.2),
                },
            };
            match cmap.edit(&edit) {
                Ok(next) => cmap = next,
                Err(_) => rejected += 1,
            }
            check_invariants(&cmap).map_err(|e| format!("after {edit:?}: {e}"))?;
        }
    }
    Ok(format!("exact control points, midpoint (128,128,128), 1000 edit sequences valid ({rejected} edits rejected)"))
}

// Determinism.

fn determinism() -> Outcome {
    let dir = common::demo_dir();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let size = demo::GOLDEN_SIZE.to_string();
    let render = |name: &str, threads: Option<&str>| -> Result<Vec<u8>, String> {
        let out = tmp.path().join(name);
        let mut args = vec![
            "plateink".to_string(),
            "render".into(),
            "--state".into(),
            path_str(&dir.join(demo::STATE_FILE)),
            "--dataset".into(),
            path_str(&dir.join(demo::DATASET_FILE)),
            "--assets".into(),
            path_str(&dir.join(demo::ASSETS_DIR)),
            "--out".into(),
            path_str(&out),
            "--width".into(),
            size.clone(),
            "--height".into(),
            size.clone(),
        ];
        if let Some(t) = threads {
            args.extend(["--threads".to_string(), t.to_string()]);
        }
        let mut sink = Vec::new();
        let mut err = Vec::new();
        let code = plateink::cli::run(args, &mut sink, &mut err);
        if code != 0 {
            return Err(format!(
                "render exited {code}: {}",
                String::from_utf8_lossy(&err)
            ));
        }
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    let a = render("a.png", None)?;
    let b = render("b.png", None)?;
    let one = render("one.png", Some("1"))?;
    let many = render("many.png", Some("7"))?;
    ensure!(a == b, "two runs differ");
    ensure!(a == one && a == many, "thread count changes output");
    let golden = std::fs::read(dir.join(demo::GOLDEN_FILE)).map_err(|e| e.to_string())?;
    ensure!(
        a == golden,
        "render differs from the committed golden image"
    );
    Ok(format!(
        "{} bytes, identical across runs, 1 and 7 threads, and golden",
        a.len()
    ))
}

// Persistence.

fn random_command(rng: &mut ChaCha8Rng, comp: &Composition, library: &AssetLibrary) -> Command {
    let ids: Vec<String> = comp.impressions.keys().cloned().collect();
    let pick_imp = |rng: &mut ChaCha8Rng| -> String {
        if ids.is_empty() || rng.gen_bool(0.05) {
            "missing".into()
        } else {
            ids[rng.gen_range(0..ids.len())].clone()
        }
    };
    let slots = [
        "key_data",
        "glyph",
        "color_variable",
        "colormap",
        "size_range",
        "width",
        "texture",
        "uniform_size",
    ];
    let assets: Vec<String> = library
        .catalog()
        .descriptors()
        .into_iter()
        .map(|a| a.id)
        .collect();
    let position =
        |rng: &mut ChaCha8Rng| [rng.gen_range(-500.0..2000.0), rng.gen_range(-500.0..2000.0)];
    match rng.gen_range(0..12) {
        0 | 1 => Command::CreateImpression {
            plate: PlateType::ALL[rng.gen_range(0..3)],
            id: rng
                .gen_bool(0.3)
                .then(|| format!("n{}", rng.gen_range(0..5))),
            position: rng.gen_bool(0.5).then(|| position(rng)),
        },
        2 => Command::DeleteImpression {
            impression: pick_imp(rng),
        },
        3 | 4 => Command::Assign {
            impression: pick_imp(rng),
            slot: slots[rng.gen_range(0..slots.len())].into(),
            piece: piece_ref(PIECES[rng.gen_range(0..PIECES.len())]),
        },
        5 => Command::RemovePiece {
            impression: pick_imp(rng),
            slot: slots[rng.gen_range(0..slots.len())].into(),
        },
        6 => Command::SwapKeyData {
            impression: pick_imp(rng),
            key_data: piece_ref(
                [Piece::PointsKd, Piece::LinesKd, Piece::SurfaceKd][rng.gen_range(0..3)],
            ),
        },
        7 => Command::SetPrimitive {
            impression: pick_imp(rng),
            slot: ["width", "uniform_size", "size_range", "texture_scale"][rng.gen_range(0..4)]
                .into(),
            value: if rng.gen_bool(0.5) {
                PrimitiveValue::Number(rng.gen_range(0.001..0.5))
            } else {
                let a = rng.gen_range(0.001..0.1);
                PrimitiveValue::Pair([a, a + rng.gen_range(0.0..0.1)])
            },
        },
        8 => Command::MoveImpression {
            impression: pick_imp(rng),
            position: position(rng),
        },
        9 => {
            if rng.gen_bool(0.5) {
                Command::SetVisibility {
                    impression: pick_imp(rng),
                    visible: rng.gen(),
                }
            } else {
                Command::SetCollapsed {
                    impression: pick_imp(rng),
                    collapsed: rng.gen(),
                }
            }
        }
        10 => Command::ImportAsset {
            id: assets[rng.gen_range(0..assets.len())].clone(),
        },
        _ => Command::EditColormap {
            impression: pick_imp(rng),
            slot: "colormap".into(),
            edit: ColormapEdit::AddPoint {
                t: rng.gen_range(0.0..1.0),
                rgb: [rng.gen(), rng.gen(), rng.gen()],
            },
        },
    }
}

fn persistence(d: &Demo) -> Outcome {
    let ctx = Context {
        dataset: &d.dataset,
        library: &d.library,
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut applied = 0u64;
    let mut moved = 0;
    let mut flagged = 0;
    for i in 0..1000 {
        let start = if i % 2 == 0 {
            Composition::default()
        } else {
            d.state.clone()
        };
        let mut comp = start;
        for _ in 0..rng.gen_range(1..40) {
            let cmd = random_command(&mut rng, &comp, &d.library);
            comp = apply_command(&comp, &cmd, &ctx).0;
        }
        applied += comp.revision;
        moved += comp
            .impressions
            .values()
            .filter(|imp| imp.panel_position[0] != 0.0)
            .count();
        flagged += comp
            .impressions
            .values()
            .filter(|imp| !imp.visible || imp.collapsed)
            .count();
        let path = tmp.path().join(format!("s{i}.json"));
        save_state(&comp, &path).map_err(|e| e.to_string())?;
        let loaded = load_state(&path).map_err(|e| e.to_string())?;
        ensure!(
            loaded.composition == comp,
            "sequence {i} did not round-trip"
        );
        let order: Vec<&String> = comp.impressions.keys().collect();
        let back: Vec<&String> = loaded.composition.impressions.keys().collect();
        ensure!(order == back, "sequence {i} lost impression order");
    }
    ensure!(
        moved > 0 && flagged > 0,
        "generator never exercised positions or flags"
    );
    Ok(format!("1000 sequences, {applied} accepted commands, {moved} moved and {flagged} flagged impressions"))
}

// Protocol replay.

struct Observed {
    revisions: Vec<u64>,
    states: BTreeMap<u64, Composition>,
}

async fn run_client(
    url: String,
    script: Vec<ClientMessage>,
    malformed: bool,
    tag: &'static str,
    start: Arc<tokio::sync::Barrier>,
) -> (Observed, ws::Client) {
    let mut client = ws::connect(&url).await;
    let mut seen = Observed {
        revisions: Vec::new(),
        states: BTreeMap::new(),
    };
    assert!(matches!(
        ws::recv(&mut client).await,
        ServerMessage::Hello { .. }
    ));
    match ws::recv(&mut client).await {
        ServerMessage::StateUpdate { revision, state } => {
            seen.revisions.push(revision);
            seen.states.insert(revision, state);
        }
        other => panic!("expected StateUpdate, got {other:?}"),
    }
    start.wait().await;
    for (i, msg) in script.iter().enumerate() {
        ws::send(&mut client, msg).await;
        if malformed && i == 2 {
            ws::send_raw(&mut client, "{not json").await;
        }
    }
    let done = ClientMessage::RequestHistogram {
        protocol_version: 1,
        request_id: Some(format!("done-{tag}")),
        key_data: demo::LINES.into(),
        variable: "Temperature".into(),
        bins: Some(8),
    };
    ws::send(&mut client, &done).await;
    loop {
        match ws::recv(&mut client).await {
            ServerMessage::StateUpdate { revision, state } => {
                seen.revisions.push(revision);
                seen.states.insert(revision, state);
            }
            ServerMessage::Histogram {
                request_id: Some(id),
                ..
            } if id.starts_with("done") => break,
            _ => {}
        }
    }
    (seen, client)
}

async fn drain_to(client: &mut ws::Client, seen: &mut Observed, target: u64) {
    while seen.revisions.last().copied().unwrap_or(0) < target {
        if let ServerMessage::StateUpdate { revision, state } = ws::recv(client).await {
            seen.revisions.push(revision);
            seen.states.insert(revision, state);
        }
    }
}

fn scripts() -> (Vec<ClientMessage>, Vec<ClientMessage>) {
    let ds = demo::DATASET_NAME;
    let cmd = |i: usize, c: Command| ClientMessage::command(format!("c{i}"), c);
    let a = vec![
        Command::CreateImpression {
            plate: PlateType::Glyphs,
            id: Some("a-glyphs".into()),
            position: None,
        },
        Command::Assign {
            impression: "a-glyphs".into(),
            slot: "key_data".into(),
            piece: PieceRef::key_data(ds, demo::NITRATE_POINTS),
        },
        Command::Assign {
            impression: "a-glyphs".into(),
            slot: "color_variable".into(),
            piece: PieceRef::scalar(ds, "Temperature"),
        },
        Command::Assign {
            impression: "a-glyphs".into(),
            slot: "colormap".into(),
            piece: PieceRef::asset("drum"),
        },
        Command::Assign {
            impression: "a-glyphs".into(),
            slot: "colormap".into(),
            piece: PieceRef::asset("ocean"),
        },
        Command::MoveImpression {
            impression: "a-glyphs".into(),
            position: [320.0, 40.0],
        },
        Command::Assign {
            impression: demo::GLYPH_IMPRESSION.into(),
            slot: "color_variable".into(),
            piece: PieceRef::scalar(ds, "Temperature"),
        },
        Command::EditColormap {
            impression: demo::GLYPH_IMPRESSION.into(),
            slot: "colormap".into(),
            edit: ColormapEdit::AddPoint {
                t: 0.25,
                rgb: [200, 30, 30],
            },
        },
        Command::SetVisibility {
            impression: demo::SURFACE_IMPRESSION.into(),
            visible: false,
        },
    ];
    let b = vec![
        Command::CreateImpression {
            plate: PlateType::Ribbons,
            id: Some("b-ribbons".into()),
            position: None,
        },
        Command::Assign {
            impression: "b-ribbons".into(),
            slot: "key_data".into(),
            piece: PieceRef::key_data(ds, demo::LINES),
        },
        Command::ImportAsset {
            id: "stroke-5".into(),
        },
        Command::Assign {
            impression: "b-ribbons".into(),
            slot: "line_texture".into(),
            piece: PieceRef::asset("stroke-5"),
        },
        Command::SetPrimitive {
            impression: "b-ribbons".into(),
            slot: "width".into(),
            value: PrimitiveValue::Number(0.02),
        },
        Command::SwapKeyData {
            impression: demo::GLYPH_IMPRESSION.into(),
            key_data: PieceRef::key_data(ds, demo::NITRATE_POINTS),
        },
        Command::SetCollapsed {
            impression: "b-ribbons".into(),
            collapsed: true,
        },
        Command::SetVisibility {
            impression: demo::SURFACE_IMPRESSION.into(),
            visible: true,
        },
    ];
    (
        a.into_iter().enumerate().map(|(i, c)| cmd(i, c)).collect(),
        b.into_iter()
            .enumerate()
            .map(|(i, c)| cmd(100 + i, c))
            .collect(),
    )
}

fn protocol_replay(d: Demo) -> Outcome {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    let initial = d.state.clone();
    let dataset = Arc::new(d.dataset);
    let library = Arc::new(d.library);
    let engine = Arc::new(Engine::new(
        dataset.clone(),
        library.clone(),
        initial.clone(),
    ));
    let (script_a, script_b) = scripts();
    let sent = script_a.len() + script_b.len();

    let (mut seen, final_state, log) = runtime.block_on(async {
        let server = serve(engine.clone(), SocketAddr::from(([127, 0, 0, 1], 0)))
            .await
            .expect("bind");
        let url = server.url();
        let start = Arc::new(tokio::sync::Barrier::new(2));
        let (a, b) = tokio::join!(
            tokio::spawn(run_client(url.clone(), script_a, true, "a", start.clone())),
            tokio::spawn(run_client(url.clone(), script_b, false, "b", start)),
        );
        let ((mut oa, mut ca), (mut ob, mut cb)) = (a.expect("client a"), b.expect("client b"));
        let final_state = engine.snapshot();
        drain_to(&mut ca, &mut oa, final_state.revision).await;
        drain_to(&mut cb, &mut ob, final_state.revision).await;
        server.shutdown().await;
        (vec![oa, ob], final_state, engine.command_log())
    });

    ensure!(
        log.len() == sent,
        "{} commands logged, {sent} sent",
        log.len()
    );
    let ctx = Context {
        dataset: &dataset,
        library: &library,
    };
    let offline = replay(&initial, log.iter().map(|l| &l.command), &ctx);
    ensure!(
        offline == *final_state,
        "offline replay differs from the engine state"
    );

    let mut by_revision = BTreeMap::new();
    let mut comp = initial.clone();
    by_revision.insert(comp.revision, comp.clone());
    for entry in &log {
        comp = apply_command(&comp, &entry.command, &ctx).0;
        by_revision.insert(comp.revision, comp.clone());
    }
    for (i, obs) in seen.iter_mut().enumerate() {
        ensure!(
            obs.revisions.windows(2).all(|w| w[0] < w[1]),
            "client {i} revisions not increasing: {:?}",
            obs.revisions
        );
        ensure!(
            obs.revisions.last() == Some(&final_state.revision),
            "client {i} stopped at {:?}",
            obs.revisions.last()
        );
        for (rev, state) in &obs.states {
            ensure!(
                by_revision.get(rev) == Some(state),
                "client {i} state at revision {rev} differs from replay"
            );
        }
    }
    for (i, obs) in seen.iter().enumerate() {
        ensure!(
            obs.revisions[1..].windows(2).all(|w| w[1] == w[0] + 1),
            "client {i} skipped revisions after connecting: {:?}",
            obs.revisions
        );
    }
    let joined = seen.iter().map(|o| o.revisions[0]).max().unwrap_or(0);
    let common = |o: &Observed| {
        o.revisions
            .iter()
            .copied()
            .filter(|r| *r >= joined)
            .collect::<Vec<_>>()
    };
    ensure!(
        common(&seen[0]) == common(&seen[1]),
        "clients saw different revision sequences"
    );
    Ok(format!(
        "{} commands from 2 clients, final revision {}, {}/{} updates observed",
        log.len(),
        final_state.revision,
        seen[0].revisions.len(),
        seen[1].revisions.len()
    ))
}

fn run(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL {name}: {detail}");
            false
        }
    }
}

fn main() {
    // libtest flags such as --nocapture or filters are accepted and ignored
    let list = std::env::args().any(|a| a == "--list");
    let names = [
        "typed-slot matrix",
        "color variable swap",
        "glyphs on ribbon lines",
        "density sampling",
        "colormap",
        "determinism",
        "persistence",
        "protocol replay",
    ];
    if list {
        for n in names {
            println!("{n}: test");
        }
        return;
    }
    let results = [
        run(names[0], || typed_slot_matrix(&open_demo())),
        run(names[1], || color_swap(&open_demo())),
        run(names[2], || glyphs_on_lines(&open_demo())),
        run(names[3], density_sampling),
        run(names[4], colormap_criterion),
        run(names[5], determinism),
        run(names[6], || persistence(&open_demo())),
        run(names[7], || protocol_replay(open_demo())),
    ];
    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
