//! Scalar math routed through `libm` for the methods `core` does not provide.

#[allow(dead_code)] // shadowed by std's inherent methods in test builds
pub(crate) trait F64Ext {
    fn sqrt(self) -> f64;
    fn exp(self) -> f64;
    fn round(self) -> f64;
    fn hypot(self, other: f64) -> f64;
}

impl F64Ext for f64 {
    #[inline]
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    #[inline]
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    #[inline]
    fn round(self) -> f64 {
        libm::round(self)
    }
    #[inline]
    fn hypot(self, other: f64) -> f64 {
        libm::hypot(self, other)
    }
}
