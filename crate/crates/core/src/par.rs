//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these fan out over the current rayon
//! pool; without it they run the same closures sequentially. Every helper
//! returns results in input order, so callers get identical output either way
//! as long as each closure is itself deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting in index order.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over the items of a slice, collecting in order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Runs `f(chunk_index, input_chunk, output_chunk)` over aligned chunks of
/// `input` (`in_chunk` items each) and `output` (`out_chunk` items each).
pub fn zip_chunks<T, U, F>(input: &[T], in_chunk: usize, output: &mut [U], out_chunk: usize, f: F)
where
    T: Sync,
    U: Send,
    F: Fn(usize, &[T], &mut [U]) + Sync + Send,
{
    assert!(in_chunk > 0 && out_chunk > 0);
    #[cfg(feature = "parallel")]
    {
        input.par_chunks(in_chunk).zip(output.par_chunks_mut(out_chunk)).enumerate().for_each(|(i, (a, b))| f(i, a, b));
    }
    #[cfg(not(feature = "parallel"))]
    {
        input.chunks(in_chunk).zip(output.chunks_mut(out_chunk)).enumerate().for_each(|(i, (a, b))| f(i, a, b));
    }
}

/// Runs `f(index, row)` over consecutive `width`-sized rows of `data`.
pub fn for_each_row_mut<T, F>(data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(width > 0);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(width).enumerate().for_each(|(i, r)| f(i, r));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(width).enumerate().for_each(|(i, r)| f(i, r));
    }
}

/// Number of worker threads the helpers will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Runs `f` with at most `threads` workers. Sequential builds ignore the cap.
pub fn with_threads<R: Send, F: FnOnce() -> R + Send>(threads: usize, f: F) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers_preserve_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
        let w = map_slice(&v, |x| x + 1);
        assert_eq!(w[10], 21);

        let input: Vec<u32> = (0..100).collect();
        let mut out = vec![0u32; 10];
        zip_chunks(&input, 10, &mut out, 1, |_, a, b| b[0] = a.iter().sum());
        assert_eq!(out[0], 45);
        assert_eq!(out[9], (90..100u32).sum::<u32>());
    }

    #[test]
    fn thread_cap_does_not_change_results() {
        let a = with_threads(1, || map_range(500, |i| (i as f64).sqrt()));
        let b = with_threads(4, || map_range(500, |i| (i as f64).sqrt()));
        assert_eq!(a, b);
    }
}
