use rand::Rng;
use thiserror::Error;

use crate::data::{ContextDataset, ExamplePair};
use crate::scalar::Scalar;

/// Failure reported by a conditional generative model.
#[derive(Debug, Error)]
pub enum CgmError {
    #[error("{0}")]
    Model(String),
    #[error(transparent)]
    Backend(Box<dyn std::error::Error + Send + Sync>),
}

impl CgmError {
    pub fn backend<E: std::error::Error + Send + Sync + 'static>(err: E) -> Self {
        CgmError::Backend(Box::new(err))
    }
}

/// Context type of a model.
pub type Context<C> = ContextDataset<<C as Cgm>::Query, <C as Cgm>::Response>;
/// Example type of a model.
pub type Pair<C> = ExamplePair<<C as Cgm>::Query, <C as Cgm>::Response>;

/// A conditional generative model used for in-context learning.
///
/// Implementations must give the same `log_prob` for identical arguments and
/// must be shareable across threads: estimators run replicates concurrently
/// against one `&self`.
pub trait Cgm: Sync {
    type Query: Clone + Send + Sync;
    type Response: Clone + PartialEq + Send + Sync;
    type Scalar: Scalar;

    /// Draw `(x, y) ~ p(x, y | context)`.
    fn sample_pair<R: Rng + ?Sized>(
        &self,
        context: &Context<Self>,
        rng: &mut R,
    ) -> Result<Pair<Self>, CgmError>;

    /// Draw `y ~ p(y | query, context)`.
    fn sample_response<R: Rng + ?Sized>(
        &self,
        query: &Self::Query,
        context: &Context<Self>,
        rng: &mut R,
    ) -> Result<Self::Response, CgmError>;

    /// `log p(response | query, context)` in nats.
    fn log_prob(
        &self,
        response: &Self::Response,
        query: &Self::Query,
        context: &Context<Self>,
    ) -> Result<Self::Scalar, CgmError>;

    /// Appends `count` pairs, each drawn with [`Cgm::sample_pair`] conditioned
    /// on everything before it.
    ///
    /// On failure the pairs drawn so far remain in `context`. Override when
    /// the model can condition incrementally.
    fn extend_context<R: Rng + ?Sized>(
        &self,
        context: &mut Context<Self>,
        count: usize,
        rng: &mut R,
    ) -> Result<(), CgmError> {
        for _ in 0..count {
            let pair = self.sample_pair(context, rng)?;
            context.push(pair);
        }
        Ok(())
    }

    /// `count` independent draws from `p(y | query, context)`.
    ///
    /// Override when conditioning on the context is expensive and can be
    /// shared across draws. Must consume the RNG exactly as `count` calls to
    /// [`Cgm::sample_response`] would if determinism across both paths matters
    /// to the implementation.
    fn sample_responses<R: Rng + ?Sized>(
        &self,
        query: &Self::Query,
        context: &Context<Self>,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<Self::Response>, CgmError> {
        (0..count)
            .map(|_| self.sample_response(query, context, rng))
            .collect()
    }

    /// Scores every response under the same query and context.
    fn log_probs(
        &self,
        responses: &[Self::Response],
        query: &Self::Query,
        context: &Context<Self>,
    ) -> Result<Vec<Self::Scalar>, CgmError> {
        responses
            .iter()
            .map(|y| self.log_prob(y, query, context))
            .collect()
    }
}

impl<C: Cgm> Cgm for &C {
    type Query = C::Query;
    type Response = C::Response;
    type Scalar = C::Scalar;

    fn sample_pair<R: Rng + ?Sized>(
        &self,
        context: &Context<Self>,
        rng: &mut R,
    ) -> Result<Pair<Self>, CgmError> {
        (**self).sample_pair(context, rng)
    }

    fn sample_response<R: Rng + ?Sized>(
        &self,
        query: &Self::Query,
        context: &Context<Self>,
        rng: &mut R,
    ) -> Result<Self::Response, CgmError> {
        (**self).sample_response(query, context, rng)
    }

    fn log_prob(
        &self,
        response: &Self::Response,
        query: &Self::Query,
        context: &Context<Self>,
    ) -> Result<Self::Scalar, CgmError> {
        (**self).log_prob(response, query, context)
    }

    fn extend_context<R: Rng + ?Sized>(
        &self,
        context: &mut Context<Self>,
        count: usize,
        rng: &mut R,
    ) -> Result<(), CgmError> {
        (**self).extend_context(context, count, rng)
    }

    fn sample_responses<R: Rng + ?Sized>(
        &self,
        query: &Self::Query,
        context: &Context<Self>,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<Self::Response>, CgmError> {
        (**self).sample_responses(query, context, count, rng)
    }

    fn log_probs(
        &self,
        responses: &[Self::Response],
        query: &Self::Query,
        context: &Context<Self>,
    ) -> Result<Vec<Self::Scalar>, CgmError> {
        (**self).log_probs(responses, query, context)
    }
}
