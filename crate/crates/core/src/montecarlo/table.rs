//! Exact Bernoulli link draws with a tabulated bracket in front of Marcum Q.
//!
//! The link probability decreases with distance, so on a grid cell
//! `[r_k, r_k+1]` it is bracketed by the two tabulated end values. A uniform
//! draw outside the bracket decides the link without evaluating Q1; only
//! draws that land inside it pay for the exact evaluation.

use crate::channel::ChannelModel;

/// Link probability below which the table stops.
const NEGLIGIBLE: f64 = 1e-18;
const CELLS: usize = 4096;

struct Table {
    step: f64,
    values: Vec<f64>,
}

pub(crate) struct LinkSampler<'a> {
    model: &'a ChannelModel,
    tables: Vec<Table>,
}

impl<'a> LinkSampler<'a> {
    pub fn new(model: &'a ChannelModel) -> Self {
        let tables = (0..=model.max_reflections())
            .map(|c| {
                let mut reach = 1.0;
                while model.exact_unchecked(reach, c) > NEGLIGIBLE && reach < 1e12 {
                    reach *= 2.0;
                }
                let step = reach / CELLS as f64;
                let values = (0..=CELLS).map(|k| model.exact_unchecked(k as f64 * step, c)).collect();
                Table { step, values }
            })
            .collect();
        Self { model, tables }
    }

    pub fn max_reflections(&self) -> usize {
        self.tables.len() - 1
    }

    /// Whether a link of length `r` with `c` reflections is up, given a uniform draw `u`.
    pub fn link(&self, r: f64, c: usize, u: f64) -> bool {
        let t = &self.tables[c];
        let pos = r / t.step;
        let (hi, lo) = if pos >= CELLS as f64 {
            (t.values[CELLS], 0.0)
        } else {
            let k = pos as usize;
            (t.values[k], t.values[k + 1])
        };
        if u < lo {
            true
        } else if u >= hi {
            false
        } else {
            u < self.model.exact_unchecked(r, c)
        }
    }
}
