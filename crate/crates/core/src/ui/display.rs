//! Placeholder for a real display backend.
//!
//! Integrators plug in screenshot capture and text-span extraction here.
//! Without one, every call reports the backend as unavailable.

use super::{Frame, ScreenBackend, ScreenError};

#[derive(Debug, Clone, Default)]
pub struct DisplayAdapter {
    pub display: Option<String>,
}

impl ScreenBackend for DisplayAdapter {
    fn frame(&self) -> Result<Frame, ScreenError> {
        Err(ScreenError::Unavailable(self.display.clone().unwrap_or_else(|| "no display configured".into())))
    }

    fn focus(&self) -> Option<String> {
        None
    }

    fn cursor(&self) -> Option<(usize, usize)> {
        None
    }

    fn send_text(&mut self, _: &str) -> Result<(), ScreenError> {
        self.frame().map(|_| ())
    }

    fn click_at(&mut self, _: usize, _: usize) -> Result<(), ScreenError> {
        self.frame().map(|_| ())
    }

    fn press_key(&mut self, _: &str) -> Result<(), ScreenError> {
        self.frame().map(|_| ())
    }
}
