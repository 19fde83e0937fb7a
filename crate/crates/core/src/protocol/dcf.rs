use rand::Rng;

use super::OwnOutcome;

pub const CW_MIN: u32 = 32;
pub const CW_MAX: u32 = 1024;
/// 802.11b long retry limit.
pub const RETRY_LIMIT: u32 = 7;

/// Binary exponential backoff state of one 802.11 DCF station.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dcf {
    cw: u32,
    retries: u32,
}

impl Default for Dcf {
    fn default() -> Self {
        Self::new()
    }
}

impl Dcf {
    pub fn new() -> Self {
        Self { cw: CW_MIN, retries: 0 }
    }

    pub fn cw(&self) -> u32 {
        self.cw
    }

    pub fn retries(&self) -> u32 {
        self.retries
    }

    /// Counter drawn uniformly from `0..cw`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(0..self.cw)
    }

    /// Updates the window after a transmission and returns the next backoff
    /// counter together with whether the head-of-line packet was dropped.
    pub fn on_outcome<R: Rng + ?Sized>(&mut self, outcome: OwnOutcome, rng: &mut R) -> (u32, bool) {
        let mut dropped = false;
        match outcome {
            OwnOutcome::Success => {
                self.cw = CW_MIN;
                self.retries = 0;
            }
            OwnOutcome::Failure => {
                self.retries += 1;
                if self.retries > RETRY_LIMIT {
                    dropped = true;
                    self.cw = CW_MIN;
                    self.retries = 0;
                } else {
                    self.cw = (self.cw * 2).min(CW_MAX);
                }
            }
        }
        (self.draw(rng), dropped)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn window_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut d = Dcf::new();
        assert_eq!(d.cw(), 32);
        d.on_outcome(OwnOutcome::Failure, &mut rng);
        assert_eq!(d.cw(), 64);
        d.on_outcome(OwnOutcome::Success, &mut rng);
        assert_eq!(d.cw(), 32);

        let mut d = Dcf { cw: CW_MAX, retries: 3 };
        d.on_outcome(OwnOutcome::Failure, &mut rng);
        assert_eq!(d.cw(), CW_MAX);
    }

    #[test]
    fn drop_after_retry_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut d = Dcf::new();
        let mut windows = Vec::new();
        for _ in 0..RETRY_LIMIT {
            let (counter, dropped) = d.on_outcome(OwnOutcome::Failure, &mut rng);
            assert!(!dropped);
            assert!(counter < d.cw());
            windows.push(d.cw());
        }
        assert_eq!(windows, [64, 128, 256, 512, 1024, 1024, 1024]);
        let (_, dropped) = d.on_outcome(OwnOutcome::Failure, &mut rng);
        assert!(dropped);
        assert_eq!((d.cw(), d.retries()), (CW_MIN, 0));
    }
}
