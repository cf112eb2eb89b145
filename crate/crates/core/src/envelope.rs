//! Upper envelope of a family of lines on the real line.

/// One stretch of the envelope: `line` is the maximizer on `[start, next.start)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub line: usize,
    pub start: f64,
}

/// Computes the upper envelope of `y = slopes[i] * x + intercepts[i]`, left to right.
///
/// The first segment starts at `-inf`. Lines that are maximal only at isolated
/// points are dropped; among identical lines the lowest index is kept.
pub(crate) fn upper_envelope(
    slopes: &[f64],
    intercepts: &[f64],
    order: &mut Vec<usize>,
    out: &mut Vec<Segment>,
) {
    debug_assert_eq!(slopes.len(), intercepts.len());
    out.clear();
    order.clear();
    order.extend(0..slopes.len());
    order.sort_by(|&a, &b| {
        slopes[a]
            .total_cmp(&slopes[b])
            .then(intercepts[b].total_cmp(&intercepts[a]))
            .then(a.cmp(&b))
    });

    // stack of line indices, `out` mirrors it with breakpoints
    for pos in 0..order.len() {
        let l = order[pos];
        if pos > 0 && slopes[order[pos - 1]] == slopes[l] {
            // parallel and not higher than the one already considered
            continue;
        }
        loop {
            let Some(top) = out.last().copied() else {
                out.push(Segment {
                    line: l,
                    start: f64::NEG_INFINITY,
                });
                break;
            };
            let x = crossing(slopes, intercepts, top.line, l);
            if x <= top.start {
                out.pop();
                continue;
            }
            out.push(Segment { line: l, start: x });
            break;
        }
    }
}

fn crossing(slopes: &[f64], intercepts: &[f64], a: usize, b: usize) -> f64 {
    (intercepts[a] - intercepts[b]) / (slopes[b] - slopes[a])
}
