//! Deterministic random-term generation shared by the integration suites.

use ptyterm::{Mode, Term};

/// Splitmix-style generator; fixed seeds keep the corpora reproducible.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(seed.wrapping_add(0x9e3779b97f4a7c15))
    }

    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

fn fresh(depth: usize) -> String {
    format!("v{}", depth)
}

fn gen_value(rng: &mut Rng, env: &mut Vec<String>, budget: usize, mode: Mode) -> Term {
    if !env.is_empty() && budget <= 1 {
        let ix = rng.below(env.len() as u64) as usize;
        return Term::var(env[ix].clone());
    }
    if !env.is_empty() && rng.below(3) == 0 {
        let ix = rng.below(env.len() as u64) as usize;
        return Term::var(env[ix].clone());
    }
    let x = fresh(env.len());
    env.push(x.clone());
    let body = gen_term(rng, env, budget.saturating_sub(1).max(1), mode);
    env.pop();
    Term::lam(x, body)
}

fn gen_term(rng: &mut Rng, env: &mut Vec<String>, budget: usize, mode: Mode) -> Term {
    if budget <= 1 {
        return gen_value(rng, env, budget, mode);
    }
    match rng.below(8) {
        0 | 1 => gen_value(rng, env, budget, mode),
        2 | 3 => {
            // application; CbV demands value children
            let (lf, la) = split_budget(rng, budget - 1);
            match mode {
                Mode::Cbv => {
                    let f = gen_value(rng, env, lf, mode);
                    let a = gen_value(rng, env, la, mode);
                    Term::app(f, a)
                }
                Mode::Cbn => {
                    let f = gen_term(rng, env, lf, mode);
                    let a = gen_term(rng, env, la, mode);
                    Term::app(f, a)
                }
            }
        }
        4 | 5 => {
            let (ll, lr) = split_budget(rng, budget - 1);
            Term::choice(
                gen_term(rng, env, ll, mode),
                gen_term(rng, env, lr, mode),
            )
        }
        _ => {
            if mode == Mode::Cbn {
                let (lf, la) = split_budget(rng, budget - 1);
                return Term::app(
                    gen_term(rng, env, lf, mode),
                    gen_term(rng, env, la, mode),
                );
            }
            let (ln, lb) = split_budget(rng, budget - 1);
            let bound = gen_term(rng, env, ln, mode);
            let x = fresh(env.len());
            env.push(x.clone());
            let body = gen_term(rng, env, lb, mode);
            env.pop();
            Term::let_in(x, bound, body)
        }
    }
}

fn split_budget(rng: &mut Rng, budget: usize) -> (usize, usize) {
    if budget <= 2 {
        return (1, 1);
    }
    let left = 1 + rng.below((budget - 1) as u64) as usize;
    (left, budget - left)
}

/// A closed term of the given mode with at most `max_size` constructors.
pub fn gen_closed(rng: &mut Rng, max_size: usize, mode: Mode) -> Term {
    let budget = 2 + rng.below((max_size.saturating_sub(2).max(1)) as u64) as usize;
    let mut env = Vec::new();
    let t = gen_term(rng, &mut env, budget, mode);
    debug_assert!(t.is_closed());
    debug_assert!(t.is_well_formed(mode));
    t
}

pub fn corpus(seed: u64, count: usize, max_size: usize, mode: Mode) -> Vec<Term> {
    let mut rng = Rng::new(seed);
    (0..count)
        .map(|_| gen_closed(&mut rng, max_size, mode))
        .collect()
}
