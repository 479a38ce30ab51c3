//! Row-major table indexing shared by the propagation kernels.

/// Strides for a row-major table over `cards` (last variable fastest).
pub(crate) fn row_major_strides(cards: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; cards.len()];
    let mut s = 1;
    for k in (0..cards.len()).rev() {
        strides[k] = s;
        s *= cards[k];
    }
    strides
}

/// Index change when digit `k` increments and all later digits wrap to zero.
pub(crate) fn carry_deltas(strides: &[usize], cards: &[usize]) -> Vec<isize> {
    let mut out = vec![0isize; cards.len()];
    let mut wrapped = 0isize;
    for k in (0..cards.len()).rev() {
        out[k] = strides[k] as isize - wrapped;
        wrapped += (cards[k] as isize - 1) * strides[k] as isize;
    }
    out
}

/// Odometer over a mixed-radix assignment, last digit fastest.
#[derive(Debug, Clone)]
pub(crate) struct Odometer {
    cards: Vec<usize>,
    pub(crate) states: Vec<usize>,
}

impl Odometer {
    pub(crate) fn new(cards: Vec<usize>) -> Self {
        let states = vec![0; cards.len()];
        Odometer { cards, states }
    }

    /// Moves to the next assignment and returns the digit that incremented,
    /// or `None` once every assignment has been visited.
    #[inline]
    pub(crate) fn advance(&mut self) -> Option<usize> {
        for k in (0..self.cards.len()).rev() {
            if self.states[k] + 1 < self.cards[k] {
                self.states[k] += 1;
                return Some(k);
            }
            self.states[k] = 0;
        }
        None
    }
}

pub(crate) fn product(cards: &[usize]) -> usize {
    cards.iter().product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deltas_track_row_major_index() {
        let cards = vec![2, 3, 2];
        let strides = row_major_strides(&cards);
        assert_eq!(strides, vec![6, 2, 1]);
        let deltas = carry_deltas(&strides, &cards);
        let mut od = Odometer::new(cards.clone());
        let mut idx = 0isize;
        let mut seen = vec![idx];
        while let Some(k) = od.advance() {
            idx += deltas[k];
            seen.push(idx);
        }
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn empty_odometer_has_one_assignment() {
        let mut od = Odometer::new(vec![]);
        assert_eq!(od.advance(), None);
    }
}
