use std::collections::VecDeque;

/// Sampled link between two controllers.
///
/// Values are pushed once per communication period and come out
/// `delay_periods` pushes later, held in between. Before the pipeline has
/// filled, the oldest value seen is returned.
#[derive(Clone, Debug)]
pub struct CommChannel<T> {
    delay_periods: usize,
    buffer: VecDeque<T>,
}

impl<T: Clone> CommChannel<T> {
    pub fn new(delay_periods: usize) -> Self {
        Self {
            delay_periods,
            buffer: VecDeque::with_capacity(delay_periods + 1),
        }
    }

    pub fn delay_periods(&self) -> usize {
        self.delay_periods
    }

    /// Sends `value` and returns what the receiver sees this period.
    pub fn exchange(&mut self, value: T) -> T {
        self.buffer.push_back(value);
        while self.buffer.len() > self.delay_periods + 1 {
            self.buffer.pop_front();
        }
        self.buffer
            .front()
            .cloned()
            .expect("buffer holds the value just pushed")
    }

    pub fn clear(&mut self) {
        self.buffer.clear();
    }
}
