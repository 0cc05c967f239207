use rand::Rng;

/// Unweighted particle approximation of a belief.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Belief<S> {
    particles: Vec<S>,
}

impl<S> Belief<S> {
    pub fn new(particles: Vec<S>) -> Self {
        Belief { particles }
    }

    pub fn particles(&self) -> &[S] {
        &self.particles
    }

    pub fn into_particles(self) -> Vec<S> {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Uniform draw of one particle. Panics on an empty belief.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &S {
        &self.particles[rng.random_range(0..self.particles.len())]
    }
}

impl<S> FromIterator<S> for Belief<S> {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Belief::new(iter.into_iter().collect())
    }
}
