//! Parallel building blocks with a sequential fallback.
//!
//! Every scan in this crate is contracted to return results that do not
//! depend on the thread count. The helpers here enforce that: maps collect in
//! index order, and sums use fixed chunk boundaries so the reduction tree is
//! the same no matter how work is stolen.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for [`stable_sum`]. Fixed so partial sums are reproducible.
const SUM_CHUNK: usize = 4096;

/// Minimum items per parallel task; below this, scheduling overhead beats
/// the work itself (measured on small PDE boxes and scan grids).
#[cfg(feature = "parallel")]
const MIN_GRAIN: usize = 1024;

/// Inputs at or below this many elements run inline: the fork-join latency
/// of a parallel region exceeds the work for the element-wise loops guarded
/// by this constant (measured: spectral steps on boxes up to ~512² are
/// faster inline, while the multi-million-point kernel grids gain from the
/// pool).
pub const SEQ_CUTOFF: usize = 262144;

/// Configures the global thread pool size. A no-op without the `parallel`
/// feature; returns `false` if the pool was already initialized.
pub fn set_thread_count(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        true
    }
}

/// Maps `f` over `0..len`, collecting results in index order.
pub fn map_index<U: Send>(len: usize, f: impl Fn(usize) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().with_min_len(MIN_GRAIN.min(len.div_ceil(64).max(1))).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..len).map(f).collect()
    }
}

/// Applies `f` to equal chunks of `data` (the last may be shorter). The chunk
/// index and the chunk's start offset are passed along.
pub fn for_each_chunk_mut<T: Send>(
    data: &mut [T],
    chunk: usize,
    f: impl Fn(usize, &mut [T]) + Sync + Send,
) {
    #[cfg(feature = "parallel")]
    {
        if data.len() > SEQ_CUTOFF {
            let grain = (MIN_GRAIN / chunk.max(1)).max(1);
            data.par_chunks_mut(chunk)
                .enumerate()
                .with_min_len(grain)
                .for_each(|(i, c)| f(i * chunk, c));
            return;
        }
    }
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i * chunk, c));
}

/// Like [`map_index`] but for closures whose per-item cost is tiny
/// (nanoseconds): small inputs run inline instead of waking the pool.
pub fn map_index_cheap<U: Send>(len: usize, f: impl Fn(usize) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        if len > SEQ_CUTOFF {
            return map_index(len, f);
        }
    }
    (0..len).map(f).collect()
}

/// Sum of `f(i)` over `0..len` with fixed chunk boundaries: partial sums are
/// computed per chunk and then added in chunk order, so the result is
/// identical for any thread count (and for the sequential build).
pub fn stable_sum_fn(len: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    let n_chunks = len.div_ceil(SUM_CHUNK);
    let per_chunk = |c: usize| {
        let lo = c * SUM_CHUNK;
        let hi = (lo + SUM_CHUNK).min(len);
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        acc
    };
    if len <= SEQ_CUTOFF {
        return (0..n_chunks).map(per_chunk).sum();
    }
    let partials = map_index(n_chunks, per_chunk);
    partials.iter().sum()
}

/// Deterministic sum of a slice; see [`stable_sum_fn`].
pub fn stable_sum(xs: &[f64]) -> f64 {
    stable_sum_fn(xs.len(), |i| xs[i])
}

/// Maximum of `f(i)` over `0..len` together with the smallest index attaining
/// it. `f` must be non-NaN. Deterministic: ties break toward the lower index.
pub fn stable_max(len: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> (f64, usize) {
    let n_chunks = len.div_ceil(SUM_CHUNK);
    let partials = map_index(n_chunks, |c| {
        let lo = c * SUM_CHUNK;
        let hi = (lo + SUM_CHUNK).min(len);
        let mut best = f64::NEG_INFINITY;
        let mut best_i = lo;
        for i in lo..hi {
            let v = f(i);
            if v > best {
                best = v;
                best_i = i;
            }
        }
        (best, best_i)
    });
    partials.into_iter().fold(
        (f64::NEG_INFINITY, 0),
        |(b, bi), (v, i)| {
            if v > b {
                (v, i)
            } else {
                (b, bi)
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_sum_matches_sequential() {
        let xs: Vec<f64> = (0..100_000).map(|i| ((i * 37 + 11) % 97) as f64 * 0.1).collect();
        let par = stable_sum(&xs);
        let mut seq = 0.0;
        for c in xs.chunks(SUM_CHUNK) {
            let mut acc = 0.0;
            for x in c {
                acc += x;
            }
            seq += acc;
        }
        assert_eq!(par, seq);
    }

    #[test]
    fn stable_max_prefers_lowest_index() {
        let xs = [1.0, 5.0, 5.0, 2.0];
        let (v, i) = stable_max(xs.len(), |k| xs[k]);
        assert_eq!(v, 5.0);
        assert_eq!(i, 1);
    }
}
