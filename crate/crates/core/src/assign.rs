//! Mixed-radix assignment indexing. The first variable is the most
//! significant digit everywhere in the crate (CPT rows, joint tables,
//! factor entries).

/// Number of assignments, or `None` on overflow.
pub fn space_size(cards: &[usize]) -> Option<u128> {
    cards
        .iter()
        .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128))
}

/// Flat index of `states` under `cards`.
pub fn flat_index(cards: &[usize], states: &[usize]) -> usize {
    debug_assert_eq!(cards.len(), states.len());
    cards
        .iter()
        .zip(states)
        .fold(0, |acc, (&c, &s)| acc * c + s)
}

/// Iterator over every assignment in flat-index order.
pub struct Assignments {
    cards: Vec<usize>,
    current: Option<Vec<usize>>,
}

impl Assignments {
    pub fn new(cards: &[usize]) -> Self {
        let current = if cards.iter().any(|&c| c == 0) {
            None
        } else {
            Some(vec![0; cards.len()])
        };
        Assignments {
            cards: cards.to_vec(),
            current,
        }
    }
}

impl Iterator for Assignments {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let mut i = cur.len();
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < self.cards[i] {
                break;
            }
            cur[i] = 0;
        }
        Some(out)
    }
}

pub fn assignments(cards: &[usize]) -> Assignments {
    Assignments::new(cards)
}
