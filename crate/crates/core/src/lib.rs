//! Composition engine for plate-based 3D visualizations.
//!
//! A plate is a rendering algorithm with typed slots. Registering a plate
//! with key data and filling its slots with data variables and visual assets
//! produces a data impression; the impressions of a session form a
//! composition, which the renderer turns into an image and the sync server
//! shares with design clients.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod asset_library;
pub mod cli;
pub mod colormap;
pub mod composition;
pub mod data_model;
pub mod demo;
pub mod math;
pub mod plate;
pub mod renderer;
pub mod sampling;
pub mod sync_server;
