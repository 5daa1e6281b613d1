use crate::types::{ByteSpan, ContextWindow, FileKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    /// Whole lines kept on each side beyond the match's own line(s).
    pub lines: usize,
    /// Hard cap on bytes kept on each side.
    pub max_bytes: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            lines: 3,
            max_bytes: 2048,
        }
    }
}

/// 1-based line number of `offset`.
pub fn line_number(bytes: &[u8], offset: usize) -> usize {
    bytes[..offset.min(bytes.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
        + 1
}

fn line_start(bytes: &[u8], offset: usize) -> usize {
    bytes[..offset]
        .iter()
        .rposition(|&b| b == b'\n')
        .map_or(0, |i| i + 1)
}

/// Index of the `\n` ending the line containing `offset`, or `bytes.len()`.
fn line_end(bytes: &[u8], offset: usize) -> usize {
    bytes[offset..]
        .iter()
        .position(|&b| b == b'\n')
        .map_or(bytes.len(), |i| offset + i)
}

fn is_continuation(b: u8) -> bool {
    b & 0b1100_0000 == 0b1000_0000
}

/// Capture the text around `span`: from the start of the line `window.lines`
/// above the match's first line, to the end of the line `window.lines` below
/// its last line (newline excluded). Each side is capped at
/// `window.max_bytes` without splitting a UTF-8 sequence.
pub fn extract_context(
    bytes: &[u8],
    span: ByteSpan,
    window: WindowConfig,
    file_kind: FileKind,
) -> ContextWindow {
    let start = span.start.min(bytes.len());
    let end = span.end.clamp(start, bytes.len());

    let mut from = line_start(bytes, start);
    for _ in 0..window.lines {
        if from == 0 {
            break;
        }
        from = line_start(bytes, from - 1);
    }

    let last = if end > start { end - 1 } else { start };
    let mut to = if last < bytes.len() {
        line_end(bytes, last)
    } else {
        bytes.len()
    };
    // `to` indexes a line break (possibly the match's own last byte) or EOF.
    for _ in 0..window.lines {
        if to >= bytes.len() {
            break;
        }
        to = line_end(bytes, to + 1);
    }

    let mut before = &bytes[from..start];
    if before.len() > window.max_bytes {
        let mut cut = before.len() - window.max_bytes;
        while cut < before.len() && is_continuation(before[cut]) {
            cut += 1;
        }
        before = &before[cut..];
    }
    let mut after = &bytes[end..to.max(end)];
    if after.len() > window.max_bytes {
        let mut cut = window.max_bytes;
        while cut > 0 && is_continuation(after[cut]) {
            cut -= 1;
        }
        after = &after[..cut];
    }

    ContextWindow {
        before: String::from_utf8_lossy(before).into_owned(),
        after: String::from_utf8_lossy(after).into_owned(),
        file_kind,
    }
}
