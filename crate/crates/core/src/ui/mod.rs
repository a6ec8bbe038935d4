//! UI interaction primitives shared by every subject agent interface.
//!
//! Typing is verified against the screen, clicks are anchored on visible
//! text, and a recorder captures every distinct frame.

pub mod capture;
pub mod display;
pub mod terminal;

use serde::{Deserialize, Serialize};

pub use capture::{watch_changes, CaptureRecorder, CaptureTrigger, FramePoll, ScreenCapture, Watch};
pub use display::DisplayAdapter;
pub use terminal::{InputField, UiEvent, VirtualTerminal};

pub const FOCUS_FEEDBACK: &str = "select input field first";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScreenError {
    #[error("screen backend unavailable: {0}")]
    Unavailable(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// A rendered screen: a rows x cols character grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Frame {
    lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextSpan {
    pub text: String,
    pub row: usize,
    pub col_start: usize,
    /// Exclusive.
    pub col_end: usize,
    pub span_id: String,
}

impl TextSpan {
    fn new(text: &str, row: usize, col_start: usize) -> Self {
        let col_end = col_start + text.chars().count();
        TextSpan { text: text.into(), row, col_start, col_end, span_id: format!("r{row}c{col_start}") }
    }

    fn center(&self) -> (f64, f64) {
        (self.row as f64, (self.col_start + self.col_end) as f64 / 2.0)
    }
}

impl Frame {
    pub fn from_cells(cells: Vec<Vec<char>>) -> Self {
        Frame { lines: cells.into_iter().map(|r| r.into_iter().collect()).collect() }
    }

    /// Builds a frame from text lines, padding to `cols`.
    pub fn from_text(rows: usize, cols: usize, text: &str) -> Self {
        let mut cells = vec![vec![' '; cols]; rows];
        for (r, line) in text.lines().take(rows).enumerate() {
            for (c, ch) in line.chars().take(cols).enumerate() {
                cells[r][c] = ch;
            }
        }
        Self::from_cells(cells)
    }

    pub fn rows(&self) -> usize {
        self.lines.len()
    }

    pub fn cols(&self) -> usize {
        self.lines.first().map_or(0, |l| l.chars().count())
    }

    pub fn row(&self, r: usize) -> &str {
        self.lines.get(r).map_or("", String::as_str)
    }

    pub fn cell(&self, r: usize, c: usize) -> char {
        self.row(r).chars().nth(c).unwrap_or(' ')
    }

    /// Grid dump with trailing blanks trimmed and trailing empty lines dropped.
    pub fn text(&self) -> String {
        let mut lines: Vec<&str> = self.lines.iter().map(|l| l.trim_end()).collect();
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        lines.join("\n")
    }

    pub fn contains(&self, needle: &str) -> bool {
        self.lines.iter().any(|l| l.contains(needle))
    }

    /// Every non-overlapping occurrence of `target`, in row-major order.
    pub fn find(&self, target: &str) -> Vec<TextSpan> {
        let t: Vec<char> = target.chars().collect();
        let mut out = Vec::new();
        if t.is_empty() {
            return out;
        }
        for (r, line) in self.lines.iter().enumerate() {
            let chars: Vec<char> = line.chars().collect();
            let mut c = 0;
            while c + t.len() <= chars.len() {
                if chars[c..c + t.len()] == t[..] {
                    out.push(TextSpan::new(target, r, c));
                    c += t.len();
                } else {
                    c += 1;
                }
            }
        }
        out
    }

    /// Text index: runs of text separated by two or more blanks.
    pub fn spans(&self) -> Vec<TextSpan> {
        let mut out = Vec::new();
        for (r, line) in self.lines.iter().enumerate() {
            let chars: Vec<char> = line.chars().collect();
            let mut c = 0;
            while c < chars.len() {
                if chars[c] == ' ' {
                    c += 1;
                    continue;
                }
                let start = c;
                let mut end = c;
                while c < chars.len() {
                    if chars[c] != ' ' {
                        end = c + 1;
                        c += 1;
                    } else if c + 1 < chars.len() && chars[c + 1] != ' ' {
                        c += 1;
                    } else {
                        break;
                    }
                }
                let text: String = chars[start..end].iter().collect();
                out.push(TextSpan::new(&text, r, start));
                c = end;
            }
        }
        out
    }

    pub fn span_at(&self, row: usize, col: usize) -> Option<TextSpan> {
        self.spans().into_iter().find(|s| s.row == row && col >= s.col_start && col < s.col_end)
    }

    /// Cells that differ, as `(row, col)`.
    pub fn changed_cells(&self, other: &Frame) -> Vec<(usize, usize)> {
        let rows = self.rows().max(other.rows());
        let cols = self.cols().max(other.cols());
        let mut out = Vec::new();
        for r in 0..rows {
            let a: Vec<char> = self.row(r).chars().collect();
            let b: Vec<char> = other.row(r).chars().collect();
            for c in 0..cols {
                if a.get(c).unwrap_or(&' ') != b.get(c).unwrap_or(&' ') {
                    out.push((r, c));
                }
            }
        }
        out
    }
}

/// What a UI primitive drives.
pub trait ScreenBackend {
    fn frame(&self) -> Result<Frame, ScreenError>;
    fn focus(&self) -> Option<String>;
    /// Insertion point of the focused input.
    fn cursor(&self) -> Option<(usize, usize)>;
    fn send_text(&mut self, text: &str) -> Result<(), ScreenError>;
    fn click_at(&mut self, row: usize, col: usize) -> Result<(), ScreenError>;
    fn press_key(&mut self, key: &str) -> Result<(), ScreenError>;
}

/// The screen a session drives: the virtual terminal or an external display.
#[derive(Debug, Clone)]
pub enum Screen {
    Virtual(VirtualTerminal),
    Display(DisplayAdapter),
}

impl Screen {
    pub fn terminal(&self) -> Option<&VirtualTerminal> {
        match self {
            Screen::Virtual(t) => Some(t),
            Screen::Display(_) => None,
        }
    }

    pub fn terminal_mut(&mut self) -> Option<&mut VirtualTerminal> {
        match self {
            Screen::Virtual(t) => Some(t),
            Screen::Display(_) => None,
        }
    }

    fn backend(&self) -> &dyn ScreenBackend {
        match self {
            Screen::Virtual(t) => t,
            Screen::Display(d) => d,
        }
    }

    fn backend_mut(&mut self) -> &mut dyn ScreenBackend {
        match self {
            Screen::Virtual(t) => t,
            Screen::Display(d) => d,
        }
    }
}

impl ScreenBackend for Screen {
    fn frame(&self) -> Result<Frame, ScreenError> {
        self.backend().frame()
    }

    fn focus(&self) -> Option<String> {
        self.backend().focus()
    }

    fn cursor(&self) -> Option<(usize, usize)> {
        self.backend().cursor()
    }

    fn send_text(&mut self, text: &str) -> Result<(), ScreenError> {
        self.backend_mut().send_text(text)
    }

    fn click_at(&mut self, row: usize, col: usize) -> Result<(), ScreenError> {
        self.backend_mut().click_at(row, col)
    }

    fn press_key(&mut self, key: &str) -> Result<(), ScreenError> {
        self.backend_mut().press_key(key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum TypeResult {
    Ok,
    NeedsFocus { feedback: String },
    VerificationFailed { expected: String, observed: String },
}

/// Types `text` into the focused input and checks the screen for it.
///
/// `Ok` only when the cells at the cursor now spell `text`, they were blank
/// before, and nothing outside that range changed.
pub fn type_verified(screen: &mut dyn ScreenBackend, text: &str) -> Result<TypeResult, ScreenError> {
    if text.is_empty() {
        return Err(ScreenError::InvalidInput("nothing to type".into()));
    }
    if screen.focus().is_none() {
        screen.frame()?;
        return Ok(TypeResult::NeedsFocus { feedback: FOCUS_FEEDBACK.into() });
    }
    let pre = screen.frame()?;
    let Some((row, col)) = screen.cursor() else {
        return Ok(TypeResult::NeedsFocus { feedback: FOCUS_FEEDBACK.into() });
    };
    screen.send_text(text)?;
    let post = screen.frame()?;
    let n = text.chars().count();
    let observed: String = (col..col + n).map(|c| post.cell(row, c)).collect();
    let was_blank = (col..col + n).all(|c| pre.cell(row, c) == ' ');
    let changes = pre.changed_cells(&post);
    let inside = changes.iter().all(|&(r, c)| r == row && c >= col && c < col + n);
    if observed == text && was_blank && inside && !changes.is_empty() {
        Ok(TypeResult::Ok)
    } else {
        let shown: String = (col..col + n).map(|c| post.cell(row, c)).collect::<String>().trim_end().to_string();
        Ok(TypeResult::VerificationFailed { expected: text.into(), observed: shown })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Above,
    Below,
    LeftOf,
    RightOf,
    Nth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionHint {
    pub relation: Relation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<String>,
    /// 1-based, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<usize>,
}

impl PositionHint {
    pub fn nth(n: usize) -> Self {
        PositionHint { relation: Relation::Nth, anchor: None, ordinal: Some(n) }
    }

    pub fn near(relation: Relation, anchor: &str) -> Self {
        PositionHint { relation, anchor: Some(anchor.into()), ordinal: None }
    }

    pub fn validate(&self) -> Result<(), ScreenError> {
        match (self.relation, &self.anchor, self.ordinal) {
            (Relation::Nth, _, None) => Err(ScreenError::InvalidInput("nth needs an ordinal".into())),
            (Relation::Nth, _, Some(0)) => Err(ScreenError::InvalidInput("ordinals start at 1".into())),
            (Relation::Nth, _, _) => Ok(()),
            (_, None, _) => Err(ScreenError::InvalidInput("directional hint needs an anchor".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ClickResult {
    Ok { span_id: String, span: TextSpan },
    Ambiguous { count: usize },
    NotFound,
}

/// Picks the span a click on `target` means, without clicking.
pub fn resolve_target(frame: &Frame, target: &str, hint: Option<&PositionHint>) -> Result<ClickResult, ScreenError> {
    if target.is_empty() {
        return Err(ScreenError::InvalidInput("empty click target".into()));
    }
    let matches = frame.find(target);
    let pick = |s: &TextSpan| ClickResult::Ok { span_id: s.span_id.clone(), span: s.clone() };
    let Some(hint) = hint else {
        return Ok(match matches.len() {
            0 => ClickResult::NotFound,
            1 => pick(&matches[0]),
            n => ClickResult::Ambiguous { count: n },
        });
    };
    hint.validate()?;
    if hint.relation == Relation::Nth {
        let k = hint.ordinal.unwrap_or(1);
        return Ok(matches.get(k - 1).map_or(ClickResult::NotFound, pick));
    }
    let anchor_text = hint.anchor.as_deref().unwrap_or_default();
    let anchors = frame.find(anchor_text);
    let a = match anchors.len() {
        0 => return Ok(ClickResult::NotFound),
        1 => &anchors[0],
        n => return Ok(ClickResult::Ambiguous { count: n }),
    };
    let candidates: Vec<&TextSpan> = matches
        .iter()
        .filter(|s| !(s.row == a.row && s.col_start == a.col_start))
        .filter(|s| match hint.relation {
            Relation::Above => s.row < a.row,
            Relation::Below => s.row > a.row,
            Relation::LeftOf => s.row == a.row && s.col_end <= a.col_start,
            Relation::RightOf => s.row == a.row && s.col_start >= a.col_end,
            Relation::Nth => unreachable!(),
        })
        .collect();
    let (ar, ac) = a.center();
    let dist = |s: &TextSpan| {
        let (r, c) = s.center();
        (r - ar).abs() * 2.0 + (c - ac).abs()
    };
    let Some(best) = candidates.iter().map(|s| dist(s)).min_by(f64::total_cmp) else {
        return Ok(ClickResult::NotFound);
    };
    let nearest: Vec<&&TextSpan> = candidates.iter().filter(|s| dist(s) == best).collect();
    Ok(match nearest.len() {
        1 => pick(nearest[0]),
        n => ClickResult::Ambiguous { count: n },
    })
}

/// Clicks the visible text `target`. Nothing is clicked unless exactly one
/// span resolves.
pub fn click_text(
    screen: &mut dyn ScreenBackend,
    target: &str,
    hint: Option<&PositionHint>,
) -> Result<ClickResult, ScreenError> {
    let frame = screen.frame()?;
    let r = resolve_target(&frame, target, hint)?;
    if let ClickResult::Ok { span, .. } = &r {
        screen.click_at(span.row, span.col_start)?;
    }
    Ok(r)
}
