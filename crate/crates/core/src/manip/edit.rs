//! Span-replacement engine shared by every manipulation: applies a sorted,
//! non-overlapping set of byte-range edits and can remap old offsets (the
//! cursor) into the edited text.

use crate::code::Span;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone)]
pub(crate) struct SpanEdit {
    pub span: Span,
    pub replacement: String,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EditRegion {
    old_start: usize,
    old_end: usize,
    new_end: usize,
    delta_after: isize,
}

/// Applies `edits` (sorted by start, non-overlapping) to `text`.
pub(crate) fn apply_span_edits(text: &str, edits: &[SpanEdit]) -> (String, Vec<EditRegion>) {
    debug_assert!(edits.windows(2).all(|w| w[0].span.end <= w[1].span.start));
    let mut out = String::with_capacity(text.len());
    let mut regions = Vec::with_capacity(edits.len());
    let mut pos = 0usize;
    let mut delta = 0isize;
    for e in edits {
        out.push_str(&text[pos..e.span.start]);
        let new_start = out.len();
        out.push_str(&e.replacement);
        delta += e.replacement.len() as isize - e.span.len() as isize;
        regions.push(EditRegion {
            old_start: e.span.start,
            old_end: e.span.end,
            new_end: new_start + e.replacement.len(),
            delta_after: delta,
        });
        pos = e.span.end;
    }
    out.push_str(&text[pos..]);
    (out, regions)
}

/// Like [`apply_span_edits`], also reporting where each replacement landed
/// in the new text.
pub(crate) fn apply_span_edits_tracked(
    text: &str,
    edits: &[SpanEdit],
) -> (String, Vec<EditRegion>, Vec<Span>) {
    let (out, regions) = apply_span_edits(text, edits);
    let new_spans = regions
        .iter()
        .zip(edits)
        .map(|(r, e)| Span::new(r.new_end - e.replacement.len(), r.new_end))
        .collect();
    (out, regions, new_spans)
}

/// Maps a byte offset of the pre-edit text into the edited text. Offsets
/// inside a replaced region land just after its replacement.
pub(crate) fn remap_offset(regions: &[EditRegion], old: usize) -> usize {
    let mut delta = 0isize;
    for r in regions {
        if old < r.old_start {
            break;
        }
        if old < r.old_end {
            return r.new_end;
        }
        delta = r.delta_after;
    }
    (old as isize + delta) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn edits_and_offsets() {
        let text = "abc def ghi";
        let edits = [
            SpanEdit { span: Span::new(0, 3), replacement: "X".to_string() },
            SpanEdit { span: Span::new(8, 11), replacement: "LONGER".to_string() },
        ];
        let (out, regions) = apply_span_edits(text, &edits);
        assert_eq!(out, "X def LONGER");
        assert_eq!(remap_offset(&regions, 4), 2); // 'd'
        assert_eq!(remap_offset(&regions, 1), 1); // inside first edit -> after "X"
        assert_eq!(remap_offset(&regions, 9), 12); // inside second edit -> after it
        assert_eq!(remap_offset(&regions, 7), 5); // space before "ghi"
    }

    #[test]
    fn pure_deletion() {
        let text = "line1\nline2\nline3\n";
        let edits = [SpanEdit { span: Span::new(6, 12), replacement: String::new() }];
        let (out, regions) = apply_span_edits(text, &edits);
        assert_eq!(out, "line1\nline3\n");
        assert_eq!(remap_offset(&regions, 14), 8);
        assert_eq!(remap_offset(&regions, 8), 6);
    }
}
