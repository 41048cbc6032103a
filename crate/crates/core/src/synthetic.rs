//! Planted-community interaction logs for experiments and tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Interaction, InteractionLog};

/// Users and items are split into `blocks` contiguous groups; users of
/// group `b` draw their items from item group `b`, except for a `noise`
/// fraction drawn uniformly from the other groups.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedBlocks {
    pub users: usize,
    pub items: usize,
    pub blocks: usize,
    pub interactions_per_user: usize,
    pub noise: f64,
    /// Zipf-like exponent of item popularity inside each block; 0 is uniform.
    pub popularity_skew: f64,
}

impl Default for PlantedBlocks {
    fn default() -> Self {
        PlantedBlocks {
            users: 200,
            items: 100,
            blocks: 2,
            interactions_per_user: 20,
            noise: 0.05,
            popularity_skew: 1.0,
        }
    }
}

impl PlantedBlocks {
    pub fn user_block(&self, u: usize) -> usize {
        u * self.blocks / self.users
    }

    pub fn item_block(&self, i: usize) -> usize {
        i * self.blocks / self.items
    }

    /// Generates a log with tokens `u<idx>` / `i<idx>`, rating 1 and a random
    /// chronological order per user.
    pub fn generate(&self, seed: u64) -> InteractionLog {
        assert!(self.blocks >= 1 && self.users >= self.blocks && self.items >= self.blocks);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ranges: Vec<Vec<usize>> = (0..self.blocks)
            .map(|b| (0..self.items).filter(|&i| self.item_block(i) == b).collect())
            .collect();
        let mut records = Vec::with_capacity(self.users * self.interactions_per_user);
        for u in 0..self.users {
            let home = self.user_block(u);
            let mut chosen: Vec<usize> = Vec::with_capacity(self.interactions_per_user);
            let mut attempts = 0;
            while chosen.len() < self.interactions_per_user && attempts < 100 * self.interactions_per_user {
                attempts += 1;
                let block = if self.blocks > 1 && rng.random::<f64>() < self.noise {
                    let other = rng.random_range(0..self.blocks - 1);
                    if other >= home {
                        other + 1
                    } else {
                        other
                    }
                } else {
                    home
                };
                let pool = &ranges[block];
                let item = pool[self.popular_index(pool.len(), &mut rng)];
                if !chosen.contains(&item) {
                    chosen.push(item);
                }
            }
            chosen.shuffle(&mut rng);
            for (t, item) in chosen.into_iter().enumerate() {
                records.push(Interaction {
                    user: format!("u{u}"),
                    item: format!("i{item}"),
                    rating: Some(1.0),
                    timestamp: Some(t as i64),
                });
            }
        }
        InteractionLog { records }
    }

    fn popular_index(&self, len: usize, rng: &mut impl Rng) -> usize {
        if self.popularity_skew == 0.0 {
            return rng.random_range(0..len);
        }
        let weights: Vec<f64> = (1..=len).map(|r| (r as f64).powf(-self.popularity_skew)).collect();
        let total: f64 = weights.iter().sum();
        let mut x = rng.random::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if x < *w {
                return i;
            }
            x -= w;
        }
        len - 1
    }
}
