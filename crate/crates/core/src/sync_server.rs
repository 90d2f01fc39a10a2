//! Engine shared by design clients and the WebSocket endpoint that serves it.
//!
//! Every mutation goes through [`Engine::submit`], which applies commands one
//! at a time under a lock and publishes each new snapshot while still holding
//! it, so all subscribers see revisions in the same strictly increasing order.
//! Renders work from snapshots and never block commands.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use base64::Engine as _;
use futures_util::{SinkExt, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::handshake::server::{ErrorResponse, Request, Response};
use tokio_tungstenite::tungstenite::http::StatusCode;
use tokio_tungstenite::tungstenite::protocol::frame::coding::CloseCode;
use tokio_tungstenite::tungstenite::protocol::CloseFrame;
use tokio_tungstenite::tungstenite::Message;

use crate::asset_library::{AssetDescriptor, AssetLibrary};
use crate::composition::{apply_command, Command, Composition, Context, Event};
use crate::data_model::{Bounds, Dataset, GeometryKind, VariableKind, DEFAULT_HISTOGRAM_BINS};
use crate::plate::{plate_registry, PlateSpec, Refusal, RefusalCode};
use crate::renderer::{render_composition, Camera, RenderError, RenderSettings};

pub const PROTOCOL_VERSION: u32 = 1;
pub const WS_PATH: &str = "/ws";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSummary {
    pub name: String,
    pub kind: VariableKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyDataSummary {
    pub name: String,
    pub kind: GeometryKind,
    pub vertex_count: usize,
    pub variables: Vec<VariableSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub bounds: Bounds,
    pub key_data: Vec<KeyDataSummary>,
    pub fields: Vec<String>,
}

impl DatasetSummary {
    pub fn of(ds: &Dataset) -> Self {
        DatasetSummary {
            name: ds.name.clone(),
            bounds: ds.bounds,
            key_data: ds
                .key_data
                .iter()
                .map(|kd| KeyDataSummary {
                    name: kd.name.clone(),
                    kind: kd.kind,
                    vertex_count: kd.vertices.len(),
                    variables: kd
                        .variables
                        .values()
                        .map(|v| VariableSummary {
                            name: v.name.clone(),
                            kind: v.kind(),
                            range: kd.variable_range(&v.name).ok(),
                        })
                        .collect(),
                })
                .collect(),
            fields: ds.fields.iter().map(|f| f.name.clone()).collect(),
        }
    }
}

/// Client to engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Command {
        protocol_version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        command_id: Option<String>,
        command: Command,
    },
    RequestRender {
        protocol_version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<String>,
        /// Omitted means the default camera for the dataset.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        camera: Option<Camera>,
        width: u32,
        height: u32,
    },
    RequestHistogram {
        protocol_version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_id: Option<String>,
        key_data: String,
        variable: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bins: Option<usize>,
    },
}

impl ClientMessage {
    pub fn protocol_version(&self) -> u32 {
        match self {
            ClientMessage::Command {
                protocol_version, ..
            }
            | ClientMessage::RequestRender {
                protocol_version, ..
            }
            | ClientMessage::RequestHistogram {
                protocol_version, ..
            } => *protocol_version,
        }
    }

    fn request_id(&self) -> Option<String> {
        match self {
            ClientMessage::Command { command_id: id, .. }
            | ClientMessage::RequestRender { request_id: id, .. }
            | ClientMessage::RequestHistogram { request_id: id, .. } => id.clone(),
        }
    }

    pub fn command(command_id: impl Into<String>, command: Command) -> Self {
        ClientMessage::Command {
            protocol_version: PROTOCOL_VERSION,
            command_id: Some(command_id.into()),
            command,
        }
    }
}

/// Engine to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        protocol_version: u32,
        dataset: DatasetSummary,
        plates: Vec<PlateSpec>,
        assets: Vec<AssetDescriptor>,
    },
    StateUpdate {
        revision: u64,
        state: Composition,
    },
    Refused {
        #[serde(default)]
        command_id: Option<String>,
        revision: u64,
        reason: Refusal,
    },
    Warning {
        #[serde(default)]
        command_id: Option<String>,
        revision: u64,
        message: String,
    },
    RenderFrame {
        #[serde(default)]
        request_id: Option<String>,
        revision: u64,
        width: u32,
        height: u32,
        /// Base64 PNG.
        png: String,
    },
    Histogram {
        #[serde(default)]
        request_id: Option<String>,
        revision: u64,
        key_data: String,
        variable: String,
        range: (f64, f64),
        counts: Vec<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedCommand {
    pub client: u64,
    #[serde(default)]
    pub command_id: Option<String>,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub revision: u64,
    pub width: u32,
    pub height: u32,
    pub png: Vec<u8>,
    pub warnings: Vec<String>,
}

struct EngineState {
    comp: Arc<Composition>,
    log: Vec<LoggedCommand>,
}

pub struct Engine {
    dataset: Arc<Dataset>,
    library: Arc<AssetLibrary>,
    initial: Composition,
    state: Mutex<EngineState>,
    updates: broadcast::Sender<Arc<Composition>>,
    settings: RenderSettings,
}

impl Engine {
    pub fn new(dataset: Arc<Dataset>, library: Arc<AssetLibrary>, initial: Composition) -> Self {
        let (updates, _) = broadcast::channel(256);
        Engine {
            dataset,
            library,
            state: Mutex::new(EngineState {
                comp: Arc::new(initial.clone()),
                log: Vec::new(),
            }),
            initial,
            updates,
            settings: RenderSettings::default(),
        }
    }

    pub fn with_render_settings(mut self, settings: RenderSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn library(&self) -> &AssetLibrary {
        &self.library
    }

    /// State the engine started from.
    pub fn initial_state(&self) -> &Composition {
        &self.initial
    }

    pub fn snapshot(&self) -> Arc<Composition> {
        self.state
            .lock()
            .expect("engine state poisoned")
            .comp
            .clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<Arc<Composition>> {
        self.updates.subscribe()
    }

    /// Every command received, refused ones included, in application order.
    pub fn command_log(&self) -> Vec<LoggedCommand> {
        self.state
            .lock()
            .expect("engine state poisoned")
            .log
            .clone()
    }

    /// Applies a command and publishes the new state on success. Returns the
    /// revision after the command and its events.
    pub fn submit(
        &self,
        client: u64,
        command_id: Option<String>,
        command: Command,
    ) -> (u64, Vec<Event>) {
        let mut state = self.state.lock().expect("engine state poisoned");
        let ctx = Context {
            dataset: &self.dataset,
            library: &self.library,
        };
        let (next, events) = apply_command(&state.comp, &command, &ctx);
        state.log.push(LoggedCommand {
            client,
            command_id,
            command,
        });
        if next.revision != state.comp.revision {
            state.comp = Arc::new(next);
            // no subscribers is fine
            let _ = self.updates.send(state.comp.clone());
        }
        (state.comp.revision, events)
    }

    pub fn hello(&self) -> ServerMessage {
        ServerMessage::Hello {
            protocol_version: PROTOCOL_VERSION,
            dataset: DatasetSummary::of(&self.dataset),
            plates: plate_registry(),
            assets: self.library.catalog().descriptors(),
        }
    }

    /// Renders a given snapshot.
    pub fn render_snapshot(
        &self,
        comp: &Composition,
        camera: Option<Camera>,
        width: u32,
        height: u32,
    ) -> Result<Frame, RenderError> {
        let out = render_composition(
            comp,
            &self.dataset,
            &self.library,
            camera,
            width,
            height,
            &self.settings,
        )?;
        Ok(Frame {
            revision: comp.revision,
            width,
            height,
            png: out.png,
            warnings: out.warnings,
        })
    }

    /// Renders the current snapshot; the frame carries its revision.
    pub fn render(
        &self,
        camera: Option<Camera>,
        width: u32,
        height: u32,
    ) -> Result<Frame, RenderError> {
        self.render_snapshot(&self.snapshot(), camera, width, height)
    }

    pub fn histogram(
        &self,
        key_data: &str,
        variable: &str,
        bins: usize,
    ) -> Result<((f64, f64), Vec<u64>), Refusal> {
        let kd = self.dataset.key_data(key_data).ok_or_else(|| {
            Refusal::new(
                RefusalCode::Unresolved,
                format!("unknown key data \"{key_data}\""),
            )
        })?;
        let unresolved = |e: crate::data_model::VariableError| {
            Refusal::new(RefusalCode::Unresolved, e.to_string())
        };
        let range = kd.variable_range(variable).map_err(unresolved)?;
        let counts = kd.compute_histogram(variable, bins).map_err(unresolved)?;
        Ok((range, counts))
    }
}

/// Running endpoint.
pub struct ServerHandle {
    pub local_addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
}

impl ServerHandle {
    pub fn url(&self) -> String {
        format!("ws://{}{}", self.local_addr, WS_PATH)
    }

    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = (&mut self.task).await;
    }

    /// Waits until the accept loop ends.
    pub async fn join(self) {
        let _ = self.task.await;
    }
}

/// Binds `addr` and serves the engine at `/ws` until shut down.
pub async fn serve(engine: Arc<Engine>, addr: SocketAddr) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr).await?;
    let local_addr = listener.local_addr()?;
    let (tx, mut rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let mut next_client = 0u64;
        loop {
            tokio::select! {
                _ = &mut rx => break,
                accepted = listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        next_client += 1;
                        let engine = engine.clone();
                        let client = next_client;
                        tokio::spawn(async move {
                            if let Err(e) = connection(engine, stream, client).await {
                                log::debug!("client {client} ({peer}) ended: {e}");
                            }
                        });
                    }
                    Err(e) => log::warn!("accept failed: {e}"),
                },
            }
        }
    });
    Ok(ServerHandle {
        local_addr,
        shutdown: Some(tx),
        task,
    })
}

fn query_version(query: Option<&str>) -> Option<String> {
    query?
        .split('&')
        .find_map(|kv| kv.strip_prefix("protocol_version="))
        .map(str::to_string)
}

fn text(msg: &ServerMessage) -> Message {
    Message::Text(serde_json::to_string(msg).expect("server messages serialize"))
}

#[allow(clippy::result_large_err)]
async fn connection(
    engine: Arc<Engine>,
    stream: TcpStream,
    client: u64,
) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let mut requested: Option<String> = None;
    let callback = |req: &Request, resp: Response| -> Result<Response, ErrorResponse> {
        if req.uri().path() != WS_PATH {
            let mut err = ErrorResponse::new(Some(format!("no endpoint at {}", req.uri().path())));
            *err.status_mut() = StatusCode::NOT_FOUND;
            return Err(err);
        }
        requested = query_version(req.uri().query());
        Ok(resp)
    };
    let ws = tokio_tungstenite::accept_hdr_async(stream, callback).await?;
    let (mut sink, mut incoming) = ws.split();

    sink.send(text(&engine.hello())).await?;
    if let Some(v) = requested {
        if v != PROTOCOL_VERSION.to_string() {
            let frame = CloseFrame {
                code: CloseCode::Protocol,
                reason: format!(
                    "unsupported protocol_version {v}, engine speaks {PROTOCOL_VERSION}"
                )
                .into(),
            };
            sink.send(Message::Close(Some(frame))).await?;
            return Ok(());
        }
    }

    let mut updates = engine.subscribe();
    let snap = engine.snapshot();
    let mut last_sent = snap.revision;
    sink.send(text(&ServerMessage::StateUpdate {
        revision: snap.revision,
        state: (*snap).clone(),
    }))
    .await?;

    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<ServerMessage>();
    loop {
        tokio::select! {
            frame = incoming.next() => match frame {
                Some(Ok(Message::Text(t))) => {
                    for reply in handle_text(&engine, client, &t, &out_tx) {
                        sink.send(text(&reply)).await?;
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    let reply = ServerMessage::Refused {
                        command_id: None,
                        revision: engine.snapshot().revision,
                        reason: Refusal::new(RefusalCode::Parse, "binary frames are not supported"),
                    };
                    sink.send(text(&reply)).await?;
                }
                Some(Ok(Message::Close(_))) | None => break,
                Some(Ok(_)) => {}
                Some(Err(e)) => return Err(e.into()),
            },
            update = updates.recv() => match update {
                Ok(comp) => {
                    if comp.revision > last_sent {
                        last_sent = comp.revision;
                        sink.send(text(&ServerMessage::StateUpdate { revision: comp.revision, state: (*comp).clone() })).await?;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    let comp = engine.snapshot();
                    if comp.revision > last_sent {
                        last_sent = comp.revision;
                        sink.send(text(&ServerMessage::StateUpdate { revision: comp.revision, state: (*comp).clone() })).await?;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            Some(reply) = out_rx.recv() => {
                sink.send(text(&reply)).await?;
            }
        }
    }
    Ok(())
}

/// Replies to send right away; renders are answered later through `later`.
fn handle_text(
    engine: &Arc<Engine>,
    client: u64,
    raw: &str,
    later: &mpsc::UnboundedSender<ServerMessage>,
) -> Vec<ServerMessage> {
    let msg: ClientMessage = match serde_json::from_str(raw) {
        Ok(m) => m,
        Err(e) => {
            return vec![ServerMessage::Refused {
                command_id: None,
                revision: engine.snapshot().revision,
                reason: Refusal::new(RefusalCode::Parse, e.to_string()),
            }]
        }
    };
    if msg.protocol_version() != PROTOCOL_VERSION {
        return vec![ServerMessage::Refused {
            command_id: msg.request_id(),
            revision: engine.snapshot().revision,
            reason: Refusal::new(
                RefusalCode::Protocol,
                format!(
                    "protocol_version {} is not {PROTOCOL_VERSION}",
                    msg.protocol_version()
                ),
            ),
        }];
    }
    match msg {
        ClientMessage::Command {
            command_id,
            command,
            ..
        } => {
            let (revision, events) = engine.submit(client, command_id.clone(), command);
            events
                .into_iter()
                .filter_map(|e| match e {
                    Event::StateChanged { .. } => None,
                    Event::Refused { reason } => Some(ServerMessage::Refused {
                        command_id: command_id.clone(),
                        revision,
                        reason,
                    }),
                    Event::Warning { message } => Some(ServerMessage::Warning {
                        command_id: command_id.clone(),
                        revision,
                        message,
                    }),
                })
                .collect()
        }
        ClientMessage::RequestRender {
            request_id,
            camera,
            width,
            height,
            ..
        } => {
            let snap = engine.snapshot();
            let engine = engine.clone();
            let later = later.clone();
            tokio::task::spawn_blocking(move || {
                let reply = match engine.render_snapshot(&snap, camera, width, height) {
                    Ok(frame) => ServerMessage::RenderFrame {
                        request_id,
                        revision: frame.revision,
                        width,
                        height,
                        png: base64::engine::general_purpose::STANDARD.encode(&frame.png),
                    },
                    Err(e) => ServerMessage::Refused {
                        command_id: request_id,
                        revision: snap.revision,
                        reason: Refusal::new(RefusalCode::Render, e.to_string()),
                    },
                };
                let _ = later.send(reply);
            });
            Vec::new()
        }
        ClientMessage::RequestHistogram {
            request_id,
            key_data,
            variable,
            bins,
            ..
        } => {
            let revision = engine.snapshot().revision;
            match engine.histogram(&key_data, &variable, bins.unwrap_or(DEFAULT_HISTOGRAM_BINS)) {
                Ok((range, counts)) => {
                    vec![ServerMessage::Histogram {
                        request_id,
                        revision,
                        key_data,
                        variable,
                        range,
                        counts,
                    }]
                }
                Err(reason) => vec![ServerMessage::Refused {
                    command_id: request_id,
                    revision,
                    reason,
                }],
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{KeyData, VariableArray};
    use crate::plate::PlateType;

    fn engine() -> Engine {
        let ds = Dataset {
            name: "d".into(),
            bounds: Bounds::unit(),
            key_data: vec![KeyData::points("p", vec![[0.2; 3], [0.4; 3], [0.9; 3]])
                .with_variable(VariableArray::scalar("T", vec![0.0, 1.0, 2.0]))],
            fields: vec![],
        };
        Engine::new(
            Arc::new(ds),
            Arc::new(AssetLibrary::empty()),
            Composition::default(),
        )
    }

    #[test]
    fn submit_logs_and_publishes() {
        let e = engine();
        let mut rx = e.subscribe();
        let (rev, events) = e.submit(
            1,
            Some("a".into()),
            Command::CreateImpression {
                plate: PlateType::Glyphs,
                id: None,
                position: None,
            },
        );
        assert_eq!(rev, 1);
        assert_eq!(events, vec![Event::StateChanged { revision: 1 }]);
        assert_eq!(rx.try_recv().unwrap().revision, 1);
        let (rev, events) = e.submit(
            2,
            None,
            Command::DeleteImpression {
                impression: "nope".into(),
            },
        );
        assert_eq!(rev, 1);
        assert!(matches!(&events[..], [Event::Refused { .. }]));
        assert!(rx.try_recv().is_err());
        assert_eq!(e.command_log().len(), 2);
    }

    #[test]
    fn histogram_request() {
        let e = engine();
        let (range, counts) = e.histogram("p", "T", 4).unwrap();
        assert_eq!(range, (0.0, 2.0));
        assert_eq!(counts.iter().sum::<u64>(), 3);
        assert!(e.histogram("p", "nope", 4).is_err());
        assert!(e.histogram("q", "T", 4).is_err());
    }

    #[test]
    fn hello_lists_registry() {
        match engine().hello() {
            ServerMessage::Hello {
                protocol_version,
                plates,
                dataset,
                ..
            } => {
                assert_eq!(protocol_version, 1);
                assert_eq!(plates.len(), 3);
                assert_eq!(dataset.key_data[0].vertex_count, 3);
                assert_eq!(dataset.key_data[0].variables[0].range, Some((0.0, 2.0)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wire_shapes() {
        let raw = r#"{"type":"command","protocol_version":1,"command_id":"c1","command":{"command":"set_visibility","impression":"g","visible":false}}"#;
        let msg: ClientMessage = serde_json::from_str(raw).unwrap();
        assert_eq!(
            msg,
            ClientMessage::command(
                "c1",
                Command::SetVisibility {
                    impression: "g".into(),
                    visible: false
                }
            )
        );
        let raw = r#"{"type":"request_render","protocol_version":1,"width":32,"height":16}"#;
        assert!(matches!(
            serde_json::from_str::<ClientMessage>(raw).unwrap(),
            ClientMessage::RequestRender {
                width: 32,
                height: 16,
                camera: None,
                ..
            }
        ));
    }

    #[test]
    fn version_query() {
        assert_eq!(
            query_version(Some("a=1&protocol_version=2")),
            Some("2".into())
        );
        assert_eq!(query_version(None), None);
    }
}
