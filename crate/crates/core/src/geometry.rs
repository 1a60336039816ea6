//! Ground-plane geometry: headings, person-centric deltas and their inverse.
//!
//! A heading `h` is the angle of a unit orientation `(ox, oz)` measured from
//! +z towards +x, so `(ox, oz) = (sin h, cos h)`.

use std::f64::consts::PI;

pub fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

pub fn is_unit(v: [f64; 2], tol: f64) -> bool {
    (norm(v) - 1.0).abs() <= tol
}

/// Unit vector in the direction of `v`, or `None` below a norm of 1e-12.
pub fn normalize(v: [f64; 2]) -> Option<[f64; 2]> {
    let n = norm(v);
    if !n.is_finite() || n < 1e-12 {
        return None;
    }
    Some([v[0] / n, v[1] / n])
}

pub fn heading(o: [f64; 2]) -> f64 {
    o[0].atan2(o[1])
}

pub fn orient_from_heading(h: f64) -> [f64; 2] {
    let (s, c) = h.sin_cos();
    [s, c]
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Expresses a global ground-plane displacement in the frame of heading `h`.
pub fn to_local(d: [f64; 2], h: f64) -> [f64; 2] {
    let (s, c) = h.sin_cos();
    [d[0] * c - d[1] * s, d[0] * s + d[1] * c]
}

pub fn from_local(l: [f64; 2], h: f64) -> [f64; 2] {
    let (s, c) = h.sin_cos();
    [l[0] * c + l[1] * s, -l[0] * s + l[1] * c]
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Per-frame `[Δx, Δz, Δheading]` with the displacement rotated into the
/// previous frame's heading. Frame 0 has no predecessor and gets zeros.
pub fn global_to_deltas(positions: &[[f64; 2]], headings: &[f64]) -> Vec<[f64; 3]> {
    assert_eq!(positions.len(), headings.len(), "positions and headings differ in length");
    let mut out = Vec::with_capacity(positions.len());
    for t in 0..positions.len() {
        if t == 0 {
            out.push([0.0; 3]);
            continue;
        }
        let d = [positions[t][0] - positions[t - 1][0], positions[t][1] - positions[t - 1][1]];
        let [lx, lz] = to_local(d, headings[t - 1]);
        out.push([lx, lz, wrap_angle(headings[t] - headings[t - 1])]);
    }
    out
}

/// Inverse of [`global_to_deltas`] given the first frame's global state.
/// Headings are accumulated without wrapping.
pub fn integrate_deltas(p0: [f64; 2], h0: f64, deltas: &[[f64; 3]]) -> (Vec<[f64; 2]>, Vec<f64>) {
    let mut pos = Vec::with_capacity(deltas.len());
    let mut hs = Vec::with_capacity(deltas.len());
    let (mut p, mut h) = (p0, h0);
    for (t, d) in deltas.iter().enumerate() {
        if t > 0 {
            let g = from_local([d[0], d[1]], h);
            p = [p[0] + g[0], p[1] + g[1]];
            h += d[2];
        }
        pos.push(p);
        hs.push(h);
    }
    (pos, hs)
}

/// Rigid ground-plane transform that moves `origin` to (0, 0) and turns
/// heading `h` to +z.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame2 {
    pub origin: [f64; 2],
    pub heading: f64,
}

impl Frame2 {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        to_local([p[0] - self.origin[0], p[1] - self.origin[1]], self.heading)
    }
}
