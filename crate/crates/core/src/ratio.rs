// Exact non-negative rationals for the closed-form metrics. Every metric is
// a ratio of small integers, so keeping numerators and denominators exact
// lets golden values (e.g. a mass of exactly 28) survive the sum over cells.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Ratio {
    num: u128,
    den: u128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Ratio {
    pub(crate) const ZERO: Ratio = Ratio { num: 0, den: 1 };

    pub(crate) fn new(num: u128, den: u128) -> Self {
        debug_assert!(den != 0);
        let g = gcd(num, den).max(1);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub(crate) fn add(self, other: Ratio) -> Ratio {
        let g = gcd(self.den, other.den);
        let den = self.den / g * other.den;
        let num = self.num * (other.den / g) + other.num * (self.den / g);
        Ratio::new(num, den)
    }

    pub(crate) fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_reduce() {
        let s = Ratio::new(40, 6).add(Ratio::new(56, 6)).add(Ratio::new(72, 6));
        assert_eq!(s, Ratio::new(28, 1));
        assert_eq!(s.to_f64(), 28.0);
        assert_eq!(Ratio::ZERO.add(Ratio::new(0, 5)), Ratio::ZERO);
    }
}
