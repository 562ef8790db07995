//! Report plumbing shared by the analysis modules.
//!
//! Node indices are 0-based in memory and 1-based in every serialized
//! report, matching the `x1..xn` naming of model files.

use serde::{Serialize, Serializer};

pub trait OneBased {
    type Out: Serialize;
    fn one_based(&self) -> Self::Out;
}

impl OneBased for usize {
    type Out = usize;
    fn one_based(&self) -> usize {
        self + 1
    }
}

impl<T: OneBased> OneBased for [T] {
    type Out = Vec<T::Out>;
    fn one_based(&self) -> Self::Out {
        self.iter().map(OneBased::one_based).collect()
    }
}

impl<T: OneBased> OneBased for Vec<T> {
    type Out = Vec<T::Out>;
    fn one_based(&self) -> Self::Out {
        self.as_slice().one_based()
    }
}

impl<T: OneBased + ?Sized> OneBased for &T {
    type Out = T::Out;
    fn one_based(&self) -> Self::Out {
        (**self).one_based()
    }
}

impl<T: OneBased> OneBased for Option<T> {
    type Out = Option<T::Out>;
    fn one_based(&self) -> Self::Out {
        self.as_ref().map(OneBased::one_based)
    }
}

impl<A: OneBased, B: OneBased> OneBased for (A, B) {
    type Out = (A::Out, B::Out);
    fn one_based(&self) -> Self::Out {
        (self.0.one_based(), self.1.one_based())
    }
}

/// `serialize_with` helper writing node indices 1-based.
pub fn one_based<T: OneBased + ?Sized, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    v.one_based().serialize(s)
}
