use crate::model::{GameInstance, PayoffMatrix, ValenceVector};

use super::AnalyticsError;

/// First unseen instance whose target valence matches, else the first unseen one.
pub fn select_game<'a>(
    pool: &'a [GameInstance],
    seen: &[PayoffMatrix],
    target_valence: &ValenceVector,
) -> Result<&'a GameInstance, AnalyticsError> {
    let mut unseen = pool.iter().filter(|i| !seen.contains(&i.matrix)).peekable();
    let first = *unseen.peek().ok_or(AnalyticsError::PoolExhausted)?;
    Ok(unseen.find(|i| i.target_valence == *target_valence).unwrap_or(first))
}
