//! Initial populations from Voronoi tessellations, and their split into
//! island sub-populations.

use rand::Rng;

use crate::geometry::{cell_centroid, voronoi, GeometryError, Point, RegionOfInterest};
use crate::optimizer::{Chromosome, GaConfig};

/// Chromosome placing one node at the centroid of each cell of `seeds`
/// (a single Lloyd relaxation step).
pub fn voronoi_individual_from_seeds(seeds: &[Point], roi: &RegionOfInterest) -> Result<Chromosome, GeometryError> {
    let cells = voronoi(seeds, roi)?;
    let positions = cells.iter().map(|c| cell_centroid(c).map(Point::snapped)).collect::<Result<Vec<_>, _>>()?;
    Ok(Chromosome::new(positions))
}

/// Draws `n_objects` uniform seeds and relaxes them once.
pub fn voronoi_individual<R: Rng + ?Sized>(
    cfg: &GaConfig,
    roi: &RegionOfInterest,
    rng: &mut R,
) -> Result<Chromosome, GeometryError> {
    loop {
        let seeds: Vec<Point> = (0..cfg.n_objects).map(|_| roi.sample_interior(rng)).collect();
        match voronoi_individual_from_seeds(&seeds, roi) {
            // Coincident draws are astronomically rare; redraw.
            Err(GeometryError::DuplicateSeeds { .. }) => continue,
            other => return other,
        }
    }
}

/// Uniformly random placement; the initializer of the GA-only baseline.
pub fn random_individual<R: Rng + ?Sized>(cfg: &GaConfig, roi: &RegionOfInterest, rng: &mut R) -> Chromosome {
    Chromosome::new((0..cfg.n_objects).map(|_| roi.sample_position(rng)).collect())
}

pub fn initial_population<R: Rng + ?Sized>(
    cfg: &GaConfig,
    roi: &RegionOfInterest,
    rng: &mut R,
) -> Result<Vec<Chromosome>, GeometryError> {
    (0..cfg.pop_size).map(|_| voronoi_individual(cfg, roi, rng)).collect()
}

pub fn random_population<R: Rng + ?Sized>(cfg: &GaConfig, roi: &RegionOfInterest, rng: &mut R) -> Vec<Chromosome> {
    (0..cfg.pop_size).map(|_| random_individual(cfg, roi, rng)).collect()
}

/// Round-robin split: individual `i` goes to island `i % islands`.
pub fn partition<T: Clone>(pop: &[T], islands: usize) -> Vec<Vec<T>> {
    assert!(islands >= 1, "at least one island");
    let mut out: Vec<Vec<T>> = (0..islands).map(|_| Vec::with_capacity(pop.len() / islands + 1)).collect();
    for (i, ind) in pop.iter().enumerate() {
        out[i % islands].push(ind.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn roi() -> RegionOfInterest {
        RegionOfInterest::new(80.0, 80.0).unwrap()
    }

    fn min_pairwise(ps: &[Point]) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..ps.len() {
            for j in i + 1..ps.len() {
                m = m.min(ps[i].dist(ps[j]));
            }
        }
        m
    }

    #[test]
    fn single_node_goes_to_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = GaConfig { n_objects: 1, ..GaConfig::default() };
        for _ in 0..10 {
            let c = voronoi_individual(&cfg, &roi(), &mut rng).unwrap();
            assert_eq!(c.positions, vec![Point::new(40.0, 40.0)]);
        }
    }

    #[test]
    fn symmetric_pair_stays_put() {
        let c = voronoi_individual_from_seeds(&[Point::new(20.0, 40.0), Point::new(60.0, 40.0)], &roi()).unwrap();
        assert_eq!(c.positions, vec![Point::new(20.0, 40.0), Point::new(60.0, 40.0)]);
    }

    #[test]
    fn relaxation_spreads_nodes() {
        let roi = roi();
        let mut wins = 0;
        for trial in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let seeds: Vec<Point> = (0..20).map(|_| roi.sample_interior(&mut rng)).collect();
            let relaxed = voronoi_individual_from_seeds(&seeds, &roi).unwrap();
            if min_pairwise(&relaxed.positions) > min_pairwise(&seeds) {
                wins += 1;
            }
        }
        assert!(wins >= 90, "only {wins}/100 relaxed layouts were more spread out");
    }

    #[test]
    fn table_two_population_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = GaConfig::default();
        let pop = initial_population(&cfg, &roi(), &mut rng).unwrap();
        assert_eq!(pop.len(), 100);
        for c in &pop {
            assert_eq!(c.len(), 20);
            assert!(c.positions.iter().all(|&p| roi().contains_strictly(p)));
        }
        let mut again = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(initial_population(&cfg, &roi(), &mut again).unwrap(), pop);
    }

    #[test]
    fn singleton_population() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = GaConfig { pop_size: 1, ..GaConfig::default() };
        assert_eq!(initial_population(&cfg, &roi(), &mut rng).unwrap().len(), 1);
    }

    #[test]
    fn partition_sizes() {
        let items: Vec<usize> = (0..300).collect();
        let parts = partition(&items, 10);
        assert!(parts.iter().all(|p| p.len() == 30));

        let items: Vec<usize> = (0..100).collect();
        assert_eq!(partition(&items, 1), vec![items.clone()]);

        let parts = partition(&items, 6);
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![17, 17, 17, 17, 16, 16]);
        let mut union: Vec<usize> = parts.concat();
        union.sort_unstable();
        assert_eq!(union, items);
    }
}
