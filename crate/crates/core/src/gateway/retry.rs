use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Exponential backoff: `max_retries` waits of `initial * multiplier^i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub initial: Duration,
    pub multiplier: u32,
}

impl Default for RetryPolicy {
    /// 1 s, 4 s, 16 s.
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial: Duration::from_secs(1),
            multiplier: 4,
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            ..Self::default()
        }
    }

    pub fn delays(&self) -> impl Iterator<Item = Duration> + '_ {
        (0..self.max_retries).map(move |i| self.initial * self.multiplier.pow(i))
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_schedule() {
        let d: Vec<u64> = RetryPolicy::default().delays().map(|d| d.as_secs()).collect();
        assert_eq!(d, [1, 4, 16]);
        assert_eq!(RetryPolicy::none().delays().count(), 0);
    }
}
