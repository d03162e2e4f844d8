use rayon::prelude::*;
use std::time::Instant;
fn busy(ms: u64) -> u64 { let t0 = Instant::now(); let mut x = 0u64; while t0.elapsed().as_millis() < ms as u128 { x = x.wrapping_add(1); } x }
fn main() {
    println!("rayon threads: {}", rayon::current_num_threads());
    let t0 = Instant::now();
    let v: Vec<u64> = (0..4).collect();
    let _: Vec<u64> = v.par_iter().map(|_| busy(200)).collect();
    println!("4x200ms busy in parallel: {:.0}ms", t0.elapsed().as_secs_f64()*1000.0);
}
