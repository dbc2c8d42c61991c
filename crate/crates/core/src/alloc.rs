//! Per-thread allocation accounting.
//!
//! Binaries that want peak-allocation figures install [`TrackingAllocator`]
//! as their `#[global_allocator]`. Without it, [`measure`] still runs the
//! closure but reports zero bytes.

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;

thread_local! {
    static ACTIVE: Cell<bool> = const { Cell::new(false) };
    static CURRENT: Cell<isize> = const { Cell::new(0) };
    static PEAK: Cell<isize> = const { Cell::new(0) };
}

/// Wraps the system allocator and keeps live/peak byte counts for the
/// calling thread while a [`measure`] scope is open.
pub struct TrackingAllocator;

fn record(delta: isize) {
    let _ = ACTIVE.try_with(|active| {
        if !active.get() {
            return;
        }
        let _ = CURRENT.try_with(|cur| {
            let now = cur.get() + delta;
            cur.set(now);
            let _ = PEAK.try_with(|peak| {
                if now > peak.get() {
                    peak.set(now);
                }
            });
        });
    });
}

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc(layout);
        if !p.is_null() {
            record(layout.size() as isize);
        }
        p
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let p = System.alloc_zeroed(layout);
        if !p.is_null() {
            record(layout.size() as isize);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        record(-(layout.size() as isize));
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let p = System.realloc(ptr, layout, new_size);
        if !p.is_null() {
            record(new_size as isize - layout.size() as isize);
        }
        p
    }
}

/// Runs `f` and returns its result with the peak number of bytes that were
/// live at once on this thread, counted from the start of the call.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, usize) {
    let was_active = ACTIVE.with(|a| a.replace(true));
    let saved_cur = CURRENT.with(|c| c.replace(0));
    let saved_peak = PEAK.with(|p| p.replace(0));
    let out = f();
    let peak = PEAK.with(|p| p.get()).max(0) as usize;
    let inner_cur = CURRENT.with(|c| c.get());
    // fold the inner scope back into an enclosing one
    CURRENT.with(|c| c.set(saved_cur + inner_cur));
    PEAK.with(|p| p.set(saved_peak.max(saved_cur + peak as isize)));
    ACTIVE.with(|a| a.set(was_active));
    (out, peak)
}

/// True when the tracking allocator is installed and counting.
pub fn is_tracking() -> bool {
    let (_, peak) = measure(|| std::hint::black_box(vec![0u8; 64]));
    peak >= 64
}
