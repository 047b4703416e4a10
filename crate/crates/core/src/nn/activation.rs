use super::Scalar;

/// `x` for positive inputs, `exp(x) - 1` otherwise.
pub fn elu<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x
    } else {
        x.exp_m1()
    }
}

pub fn elu_derivative<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else {
        x.exp()
    }
}

pub fn elu_inplace<T: Scalar>(xs: &mut [T]) {
    for x in xs {
        *x = elu(*x);
    }
}

/// Multiplies `grad` by the ELU derivative at the pre-activation `input`.
pub fn elu_backward<T: Scalar>(input: &[T], grad: &mut [T]) {
    for (g, &x) in grad.iter_mut().zip(input) {
        *g = *g * elu_derivative(x);
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
