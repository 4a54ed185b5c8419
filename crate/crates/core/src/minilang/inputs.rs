//! Random input generation for tracing runs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ast::{Program, Type};
use super::error::InputError;
use super::value::Value;
use crate::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDist {
    /// Inclusive range for integers and array elements.
    pub int_min: i64,
    pub int_max: i64,
    /// Inclusive range for array lengths.
    pub min_array_len: usize,
    pub max_array_len: usize,
}

impl Default for InputDist {
    fn default() -> Self {
        InputDist { int_min: -50, int_max: 50, min_array_len: 1, max_array_len: 16 }
    }
}

impl InputDist {
    fn validate(&self) -> Result<(), InputError> {
        if self.int_min > self.int_max {
            return Err(InputError::BadDistribution("empty integer range".into()));
        }
        if self.min_array_len > self.max_array_len {
            return Err(InputError::BadDistribution("empty array length range".into()));
        }
        Ok(())
    }

    pub fn sample(&self, ty: Type, rng: &mut impl Rng) -> Value {
        match ty {
            Type::Int => Value::Int(rng.gen_range(self.int_min..=self.int_max)),
            Type::Bool => Value::Bool(rng.gen_bool(0.5)),
            Type::IntArray => {
                let n = rng.gen_range(self.min_array_len..=self.max_array_len);
                Value::Array((0..n).map(|_| rng.gen_range(self.int_min..=self.int_max)).collect())
            }
        }
    }
}

/// `n` random argument tuples for `p` using the default distribution.
pub fn random_inputs(p: &Program, n: usize, seed: u64) -> Result<Vec<Vec<Value>>, InputError> {
    random_inputs_with(p, n, seed, &InputDist::default())
}

pub fn random_inputs_with(p: &Program, n: usize, seed: u64, dist: &InputDist) -> Result<Vec<Vec<Value>>, InputError> {
    if n == 0 {
        return Err(InputError::ZeroCount);
    }
    dist.validate()?;
    let mut rng = seeded(seed);
    Ok((0..n).map(|_| p.params.iter().map(|q| dist.sample(q.ty, &mut rng)).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minilang::parse;

    #[test]
    fn deterministic_per_seed() {
        let p = parse("fn f(a:int[], x:int, b:bool){ return x; }").unwrap();
        assert_eq!(random_inputs(&p, 5, 1).unwrap(), random_inputs(&p, 5, 1).unwrap());
        assert_ne!(random_inputs(&p, 5, 1).unwrap(), random_inputs(&p, 5, 2).unwrap());
    }

    #[test]
    fn zero_count_is_error() {
        let p = parse("fn f(x:int){ return x; }").unwrap();
        assert_eq!(random_inputs(&p, 0, 3), Err(InputError::ZeroCount));
    }

    #[test]
    fn values_within_range() {
        let p = parse("fn f(x:int, a:int[]){ return x; }").unwrap();
        for input in random_inputs(&p, 1000, 2).unwrap() {
            let Value::Int(x) = input[0] else { panic!() };
            assert!((-50..=50).contains(&x));
            let Value::Array(xs) = &input[1] else { panic!() };
            assert!((1..=16).contains(&xs.len()));
            assert!(xs.iter().all(|v| (-50..=50).contains(v)));
        }
    }
}
