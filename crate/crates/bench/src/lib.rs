//! Shared fixtures for the criterion benchmarks.

use gaugefem::fe::build_space;
use gaugefem::mesh::{DomainKind, DomainSpec};
use gaugefem::FeSpace;

/// Dirichlet square space at the given resolution and order, the common
/// fixture of every pipeline benchmark.
pub fn square_space(h: f64, p: usize) -> FeSpace {
    let spec = DomainSpec::dirichlet(DomainKind::Square);
    build_space(spec.build_mesh(h).unwrap(), p, &spec.bc).unwrap()
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_builds() {
        let space = super::square_space(0.4, 1);
        assert!(space.num_dofs > 0);
    }
}
