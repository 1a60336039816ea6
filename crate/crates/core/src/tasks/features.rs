use std::collections::BTreeMap;
use std::sync::Arc;

use ssp_nn::Tensor;

use crate::error::{CoreError, Result};
use crate::model::{Clip, PersonTrack, Role};

/// `(1, channels, time)` tensor from per-frame rows.
pub fn person_tensor(rows: &[Vec<f64>]) -> Result<Tensor> {
    let t = rows.len();
    let ch = rows.first().map_or(0, Vec::len);
    Ok(Tensor::from_fn(1, ch, t, |_, c, k| rows[k][c])?)
}

/// Concatenates equally shaped samples along the batch axis.
pub fn stack_batch(samples: &[Tensor]) -> Result<Tensor> {
    let first = samples
        .first()
        .ok_or_else(|| CoreError::invalid("batch", "no samples"))?;
    let [_, ch, t] = first.dims();
    let mut data = Vec::with_capacity(samples.len() * ch * t);
    for s in samples {
        let [b, c, k] = s.dims();
        if c != ch || k != t {
            return Err(CoreError::invalid(
                "batch",
                format!("sample shape ({c}, {k}) differs from ({ch}, {t})"),
            ));
        }
        debug_assert_eq!(b, 1);
        data.extend_from_slice(s.data());
    }
    Ok(Tensor::from_vec(samples.len(), ch, t, data)?)
}

/// Per-frame rows from the frames covered by `clips`, each frame counted
/// once per (scene, flip) pair. `roles` are read from the clip's point of
/// view, so a flipped clip's `LeftSeller` is the mirrored right seller.
pub fn covered_rows(
    clips: &[Clip],
    roles: &[Role],
    extract: impl Fn(&[PersonTrack], usize) -> Vec<f64>,
) -> Result<Vec<Vec<f64>>> {
    let mut spans: BTreeMap<(usize, bool), (Arc<crate::model::Scene>, usize, usize)> = BTreeMap::new();
    let mut order = Vec::new();
    for c in clips {
        let key = (Arc::as_ptr(&c.scene) as usize, c.flipped);
        let end = c.start + c.length;
        spans
            .entry(key)
            .and_modify(|e| {
                e.1 = e.1.min(c.start);
                e.2 = e.2.max(end);
            })
            .or_insert_with(|| {
                order.push(key);
                (Arc::clone(&c.scene), c.start, end)
            });
    }
    let mut rows = Vec::new();
    for key in order {
        let (scene, start, end) = &spans[&key];
        let mut view = Clip::new(Arc::clone(scene), *start, end - start)?;
        view.flipped = key.1;
        let tracks: Vec<PersonTrack> = roles.iter().map(|r| view.person(*r)).collect();
        for t in 0..view.length {
            rows.push(extract(&tracks, t));
        }
    }
    Ok(rows)
}
