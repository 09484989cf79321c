//! Weighted isotonic regression with per-coordinate bounds.

/// Minimises `Σ wᵢ (zᵢ − yᵢ)²` over nondecreasing `z` with `loᵢ ≤ zᵢ ≤ hiᵢ`.
///
/// Pool-adjacent-violators for separable convex objectives: each block takes
/// the minimiser of its pooled objective, which is the weighted mean clamped
/// to the intersection of the members' bounds. Bounds may be infinite.
/// Returns `None` when the constraints are infeasible.
pub fn bounded_isotonic(y: &[f64], w: &[f64], lo: &[f64], hi: &[f64]) -> Option<Vec<f64>> {
    let n = y.len();
    assert!(w.len() == n && lo.len() == n && hi.len() == n);
    if !chain_feasible(lo, hi) {
        return None;
    }

    struct Block {
        len: usize,
        sw: f64,
        swy: f64,
        lo: f64,
        hi: f64,
        value: f64,
    }

    let mut blocks: Vec<Block> = Vec::with_capacity(n);
    for i in 0..n {
        debug_assert!(w[i] > 0.0);
        let mut b = Block {
            len: 1,
            sw: w[i],
            swy: w[i] * y[i],
            lo: lo[i],
            hi: hi[i],
            value: y[i].clamp(lo[i], hi[i]),
        };
        while let Some(prev) = blocks.last() {
            if prev.value <= b.value {
                break;
            }
            let prev = blocks.pop().unwrap();
            b.len += prev.len;
            b.sw += prev.sw;
            b.swy += prev.swy;
            b.lo = b.lo.max(prev.lo);
            b.hi = b.hi.min(prev.hi);
            if b.lo > b.hi {
                return None;
            }
            b.value = (b.swy / b.sw).clamp(b.lo, b.hi);
        }
        blocks.push(b);
    }

    let mut z = Vec::with_capacity(n);
    for b in &blocks {
        z.extend(std::iter::repeat_n(b.value, b.len));
    }
    Some(z)
}

/// Whether some nondecreasing `z` fits inside the bounds.
pub fn chain_feasible(lo: &[f64], hi: &[f64]) -> bool {
    let mut floor = f64::NEG_INFINITY;
    for (&l, &h) in lo.iter().zip(hi) {
        floor = floor.max(l);
        if floor > h {
            return false;
        }
    }
    true
}
