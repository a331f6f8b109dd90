//! Networked front end: WebSocket session server, headless bot client and
//! report formatting for the `pgg` binary.

pub mod bot;
pub mod report;
pub mod server;
