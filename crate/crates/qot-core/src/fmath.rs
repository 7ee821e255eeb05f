//! Float math shim: inherent `f64` methods with `std`, `libm` without.

#![allow(dead_code)]

macro_rules! unary {
    ($($name:ident => $libm_name:ident),* $(,)?) => {
        $(
            #[inline(always)]
            pub fn $name(x: f64) -> f64 {
                #[cfg(feature = "std")]
                {
                    x.$name()
                }
                #[cfg(not(feature = "std"))]
                {
                    libm::$libm_name(x)
                }
            }
        )*
    };
}

unary!(
    exp => exp,
    ln => log,
    log10 => log10,
    sqrt => sqrt,
    sin => sin,
    cos => cos,
    atan => atan,
    asinh => asinh,
    exp_m1 => expm1,
    ln_1p => log1p,
    floor => floor,
    ceil => ceil,
    round => round,
    cbrt => cbrt,
    abs => fabs,
);

#[inline(always)]
pub fn powf(x: f64, y: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.powf(y)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::pow(x, y)
    }
}

#[inline(always)]
pub fn hypot(x: f64, y: f64) -> f64 {
    #[cfg(feature = "std")]
    {
        x.hypot(y)
    }
    #[cfg(not(feature = "std"))]
    {
        libm::hypot(x, y)
    }
}
