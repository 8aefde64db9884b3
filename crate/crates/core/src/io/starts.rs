use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{NcpError, Result};
use crate::geometry::{Metric, Region};

/// `n` points evenly spaced by arc length along the boundary of the
/// bounding box of `region`, in the plane of the first two axes (other
/// coordinates at `x_star`), starting at the lower-left corner and running
/// counter-clockwise. One-dimensional regions alternate between the ends.
pub fn boundary_starts(region: &Region, metric: &Metric, x_star: &[f64], n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(NcpError::InvalidInput("need at least one start".into()));
    }
    let (lo, hi) = region.bounding_box(metric);
    if lo.len() == 1 {
        return Ok((0..n).map(|i| vec![if i % 2 == 0 { lo[0] } else { hi[0] }]).collect());
    }
    let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
    let perimeter = 2.0 * (w + h);
    Ok((0..n)
        .map(|i| {
            let s = perimeter * i as f64 / n as f64;
            let (a, b) = if s < w {
                (lo[0] + s, lo[1])
            } else if s < w + h {
                (hi[0], lo[1] + (s - w))
            } else if s < 2.0 * w + h {
                (hi[0] - (s - w - h), hi[1])
            } else {
                (lo[0], hi[1] - (s - 2.0 * w - h))
            };
            let mut x = x_star.to_vec();
            x[0] = a;
            x[1] = b;
            metric.wrap(&mut x);
            x
        })
        .collect())
}

/// `n` points drawn uniformly from `region`.
pub fn random_starts(region: &Region, metric: &Metric, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| region.sample(&mut rng, metric)).collect()
}
