//! Fixtures shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wolffkit::verify::{random_atomic, random_points};
use wolffkit::{AtomicMeasure, CellDensityMeasure, Point};

pub fn atoms(count: usize) -> AtomicMeasure {
    random_atomic(&mut ChaCha8Rng::seed_from_u64(1), 3, count, 0.0, 1.0).unwrap()
}

pub fn points(count: usize) -> Vec<Point> {
    random_points(&mut ChaCha8Rng::seed_from_u64(2), 3, count, -0.5, 1.5, |_| true)
}

pub fn unit_box(cells: usize) -> CellDensityMeasure {
    CellDensityMeasure::uniform_cube(&[0.0; 3], 1.0, cells, 1.0).unwrap()
}

pub fn half_space_box(cells: usize) -> CellDensityMeasure {
    CellDensityMeasure::uniform_cube(&[-0.5, -0.5, 0.5], 1.0, cells, 1.0).unwrap()
}
