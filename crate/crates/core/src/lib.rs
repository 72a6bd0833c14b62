pub mod assignment;
pub mod boundary;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod functional;
pub mod geometry;
pub mod graph;
pub mod lemmas;
pub mod matching;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil {
    use rand::Rng;

    use crate::geometry::PointCloud;

    pub fn random_cloud<R: Rng>(rng: &mut R, n: usize, d: usize) -> PointCloud {
        PointCloud::from_rows(d, (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect::<Vec<_>>())).unwrap()
    }
}
