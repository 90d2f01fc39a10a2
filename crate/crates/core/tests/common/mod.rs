#![allow(dead_code)]

use std::path::PathBuf;

use plateink::asset_library::AssetLibrary;
use plateink::composition::{load_state, Composition};
use plateink::data_model::{load_dataset, Dataset};
use plateink::demo;

pub fn demo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("demo")
}

pub struct Demo {
    pub dataset: Dataset,
    pub library: AssetLibrary,
    pub state: Composition,
}

pub fn open_demo() -> Demo {
    let dir = demo_dir();
    let dataset = load_dataset(dir.join(demo::DATASET_FILE)).expect("demo dataset");
    let (library, warnings) = AssetLibrary::open(dir.join(demo::ASSETS_DIR)).expect("demo assets");
    assert!(warnings.is_empty(), "{warnings:?}");
    let loaded = load_state(dir.join(demo::STATE_FILE)).expect("demo state");
    assert!(loaded.warnings.is_empty(), "{:?}", loaded.warnings);
    Demo {
        dataset,
        library,
        state: loaded.composition,
    }
}

pub fn path_str(p: &std::path::Path) -> String {
    p.to_str().expect("utf-8 path").to_string()
}

pub mod ws {
    use std::time::Duration;

    use futures_util::{SinkExt, StreamExt};
    use plateink::sync_server::{ClientMessage, ServerMessage};
    use tokio::net::TcpStream;
    use tokio_tungstenite::tungstenite::Message;
    use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

    pub type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

    pub async fn connect(url: &str) -> Client {
        tokio_tungstenite::connect_async(url)
            .await
            .expect("connect")
            .0
    }

    pub async fn send(ws: &mut Client, msg: &ClientMessage) {
        ws.send(Message::Text(serde_json::to_string(msg).unwrap()))
            .await
            .expect("send");
    }

    pub async fn send_raw(ws: &mut Client, text: &str) {
        ws.send(Message::Text(text.to_string()))
            .await
            .expect("send");
    }

    /// Next server message; panics after five seconds.
    pub async fn recv(ws: &mut Client) -> ServerMessage {
        loop {
            let frame = tokio::time::timeout(Duration::from_secs(5), ws.next())
                .await
                .expect("timed out waiting for a server message")
                .expect("connection closed")
                .expect("websocket error");
            match frame {
                Message::Text(t) => {
                    return serde_json::from_str(&t).expect("server message parses")
                }
                Message::Ping(_) | Message::Pong(_) => continue,
                other => panic!("unexpected frame {other:?}"),
            }
        }
    }
}
