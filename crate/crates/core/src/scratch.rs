//! Per-thread pool of large matrix buffers.
//!
//! Dense cost and kernel tables at a few thousand atoms run to hundreds of
//! megabytes, and a fresh allocation of that size is paid for again in page
//! faults on first touch. Solvers take their tables from this pool and hand
//! them back when done, so repeated solves on one thread reuse warm memory.

use std::any::Any;
use std::cell::RefCell;

use ndarray::Array2;

use crate::scalar::Real;

/// Buffers kept per thread.
const POOL_CAPACITY: usize = 4;
/// Smaller tables are not worth pooling.
const MIN_POOLED_LEN: usize = 1 << 16;

thread_local! {
    static POOL: RefCell<Vec<Box<dyn Any>>> = const { RefCell::new(Vec::new()) };
}

/// A `rows x cols` matrix in standard layout whose entries are unspecified
/// (stale values from an earlier use, or zeros). Callers overwrite every
/// entry before reading any.
pub(crate) fn matrix<T: Real>(rows: usize, cols: usize) -> Array2<T> {
    let len = rows * cols;
    let mut buf: Vec<T> = if len >= MIN_POOLED_LEN { take(len) } else { Vec::new() };
    // Only storage never handed out before gets zero-filled.
    if buf.len() >= len {
        buf.truncate(len);
    } else {
        buf.resize(len, T::zero());
    }
    Array2::from_shape_vec((rows, cols), buf).expect("buffer length matches the shape")
}

/// Returns a matrix's storage to the pool.
pub(crate) fn recycle<T: Real>(m: Array2<T>) {
    if m.len() < MIN_POOLED_LEN {
        return;
    }
    let (buf, _) = m.into_raw_vec_and_offset();
    POOL.with(|p| {
        let mut p = p.borrow_mut();
        if p.len() >= POOL_CAPACITY {
            // Drop the smallest buffer of this scalar type, or give up.
            let smallest = p
                .iter()
                .enumerate()
                .filter_map(|(i, b)| b.downcast_ref::<Vec<T>>().map(|v| (i, v.capacity())))
                .min_by_key(|&(_, c)| c);
            match smallest {
                Some((i, c)) if c < buf.capacity() => {
                    p.swap_remove(i);
                }
                _ => return,
            }
        }
        p.push(Box::new(buf));
    });
}

/// The smallest pooled buffer with room for `len` entries, else a new one.
fn take<T: Real>(len: usize) -> Vec<T> {
    POOL.with(|p| {
        let mut p = p.borrow_mut();
        let best = p
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.downcast_ref::<Vec<T>>().map(|v| (i, v.capacity())))
            .filter(|&(_, c)| c >= len)
            .min_by_key(|&(_, c)| c);
        match best {
            Some((i, _)) => *p.swap_remove(i).downcast::<Vec<T>>().expect("type checked above"),
            None => Vec::with_capacity(len),
        }
    })
}
