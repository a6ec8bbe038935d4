//! Character-grid terminal with input fields, the reference screen backend.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Frame, ScreenBackend, ScreenError};

pub const DEFAULT_ROWS: usize = 40;
pub const DEFAULT_COLS: usize = 120;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputField {
    pub id: String,
    pub row: usize,
    pub col: usize,
    pub width: usize,
    /// Characters beyond this are dropped on input.
    pub max_len: usize,
    pub value: String,
    /// Span `(row, col_start, col_end)` of a label that focuses the field when clicked.
    pub label: Option<(usize, usize, usize)>,
}

impl InputField {
    pub fn new(id: &str, row: usize, col: usize, width: usize) -> Self {
        InputField { id: id.into(), row, col, width, max_len: width, value: String::new(), label: None }
    }

    pub fn with_label(mut self, row: usize, col_start: usize, col_end: usize) -> Self {
        self.label = Some((row, col_start, col_end));
        self
    }

    pub fn with_max_len(mut self, n: usize) -> Self {
        self.max_len = n.min(self.width);
        self
    }

    fn contains(&self, row: usize, col: usize) -> bool {
        let on_field = row == self.row && col >= self.col && col < self.col + self.width;
        let on_label = self.label.is_some_and(|(r, a, b)| r == row && col >= a && col < b);
        on_field || on_label
    }
}

/// Input the screen delivered to whatever is drawing on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum UiEvent {
    Click { row: usize, col: usize, text: String },
    Key { key: String, field: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VirtualTerminal {
    rows: usize,
    cols: usize,
    grid: Vec<Vec<char>>,
    fields: Vec<InputField>,
    focus: Option<String>,
    events: VecDeque<UiEvent>,
}

impl Default for VirtualTerminal {
    fn default() -> Self {
        Self::new(DEFAULT_ROWS, DEFAULT_COLS)
    }
}

impl VirtualTerminal {
    pub fn new(rows: usize, cols: usize) -> Self {
        VirtualTerminal {
            rows,
            cols,
            grid: vec![vec![' '; cols]; rows],
            fields: Vec::new(),
            focus: None,
            events: VecDeque::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Blanks the grid. Fields and focus survive.
    pub fn clear(&mut self) {
        for r in &mut self.grid {
            r.fill(' ');
        }
    }

    /// Writes `text` from `(row, col)`, clipped at the right edge.
    pub fn write_at(&mut self, row: usize, col: usize, text: &str) {
        if row >= self.rows {
            return;
        }
        for (i, ch) in text.chars().enumerate() {
            let c = col + i;
            if c >= self.cols {
                break;
            }
            self.grid[row][c] = if ch == '\n' || ch == '\t' { ' ' } else { ch };
        }
    }

    /// Writes wrapped lines from `top`, keeping only the last lines that fit
    /// above `bottom`.
    pub fn write_log(&mut self, top: usize, bottom: usize, lines: &[String]) {
        let width = self.cols;
        let mut wrapped: Vec<String> = Vec::new();
        for l in lines {
            let chars: Vec<char> = l.chars().collect();
            if chars.is_empty() {
                wrapped.push(String::new());
            }
            for chunk in chars.chunks(width) {
                wrapped.push(chunk.iter().collect());
            }
        }
        let room = bottom.saturating_sub(top);
        let start = wrapped.len().saturating_sub(room);
        for (i, l) in wrapped[start..].iter().enumerate() {
            self.write_at(top + i, 0, l);
        }
    }

    /// Adds `field`, or refreshes its geometry if the id exists, keeping the value.
    pub fn ensure_field(&mut self, field: InputField) {
        match self.fields.iter_mut().find(|f| f.id == field.id) {
            Some(f) => {
                let value = std::mem::take(&mut f.value);
                *f = InputField { value, ..field };
            }
            None => self.fields.push(field),
        }
    }

    pub fn remove_field(&mut self, id: &str) {
        self.fields.retain(|f| f.id != id);
        if self.focus.as_deref() == Some(id) {
            self.focus = None;
        }
    }

    pub fn fields(&self) -> &[InputField] {
        &self.fields
    }

    pub fn field_value(&self, id: &str) -> Option<&str> {
        self.fields.iter().find(|f| f.id == id).map(|f| f.value.as_str())
    }

    pub fn set_field_value(&mut self, id: &str, value: &str) {
        if let Some(f) = self.fields.iter_mut().find(|f| f.id == id) {
            f.value = value.chars().take(f.max_len).collect();
        }
    }

    pub fn set_focus(&mut self, id: Option<&str>) {
        self.focus = id.filter(|i| self.fields.iter().any(|f| f.id == *i)).map(String::from);
    }

    pub fn take_events(&mut self) -> Vec<UiEvent> {
        self.events.drain(..).collect()
    }

    fn focused_mut(&mut self) -> Option<&mut InputField> {
        let id = self.focus.clone()?;
        self.fields.iter_mut().find(|f| f.id == id)
    }
}

impl ScreenBackend for VirtualTerminal {
    fn frame(&self) -> Result<Frame, ScreenError> {
        let mut cells = self.grid.clone();
        for f in &self.fields {
            if f.row >= self.rows {
                continue;
            }
            for i in 0..f.width {
                let c = f.col + i;
                if c < self.cols {
                    cells[f.row][c] = ' ';
                }
            }
            for (i, ch) in f.value.chars().take(f.width).enumerate() {
                if f.col + i < self.cols {
                    cells[f.row][f.col + i] = ch;
                }
            }
        }
        Ok(Frame::from_cells(cells))
    }

    fn focus(&self) -> Option<String> {
        self.focus.clone()
    }

    fn cursor(&self) -> Option<(usize, usize)> {
        let id = self.focus.as_ref()?;
        let f = self.fields.iter().find(|f| &f.id == id)?;
        Some((f.row, f.col + f.value.chars().count()))
    }

    fn send_text(&mut self, text: &str) -> Result<(), ScreenError> {
        if let Some(f) = self.focused_mut() {
            for ch in text.chars() {
                if f.value.chars().count() >= f.max_len {
                    break;
                }
                f.value.push(ch);
            }
        }
        Ok(())
    }

    fn click_at(&mut self, row: usize, col: usize) -> Result<(), ScreenError> {
        if let Some(id) = self.fields.iter().find(|f| f.contains(row, col)).map(|f| f.id.clone()) {
            self.focus = Some(id);
            return Ok(());
        }
        let frame = self.frame()?;
        let text = frame.span_at(row, col).map(|s| s.text).unwrap_or_default();
        self.events.push_back(UiEvent::Click { row, col, text });
        Ok(())
    }

    fn press_key(&mut self, key: &str) -> Result<(), ScreenError> {
        match key {
            "Tab" if !self.fields.is_empty() => {
                let next = match &self.focus {
                    Some(id) => {
                        let i = self.fields.iter().position(|f| &f.id == id).unwrap_or(0);
                        (i + 1) % self.fields.len()
                    }
                    None => 0,
                };
                self.focus = Some(self.fields[next].id.clone());
            }
            "Escape" => self.focus = None,
            "Backspace" => {
                if let Some(f) = self.focused_mut() {
                    f.value.pop();
                }
            }
            _ => {
                let field = self.focus.clone();
                self.events.push_back(UiEvent::Key { key: key.into(), field });
            }
        }
        Ok(())
    }
}
