//! Data-parallel helpers. With the `parallel` feature off every call runs
//! sequentially; outputs keep input order either way.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// `items.iter().map(f).collect()`, possibly on the rayon pool.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Concatenated outputs of `f` over `items`, in input order.
pub fn flat_map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Vec<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().flat_map_iter(f).collect();
    }
    let _ = exec;
    items.iter().flat_map(f).collect()
}

/// Runs `f` inside a pool with `threads` workers (0 = rayon default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if threads > 0 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_kept() {
        let items: Vec<u32> = (0..1000).collect();
        let seq = map(Exec::Sequential, &items, |x| x * 2);
        let par = map(Exec::Parallel, &items, |x| x * 2);
        assert_eq!(seq, par);
        let fm = flat_map(Exec::Parallel, &items, |&x| vec![x; (x % 3) as usize]);
        assert_eq!(
            fm,
            flat_map(Exec::Sequential, &items, |&x| vec![x; (x % 3) as usize])
        );
    }
}
