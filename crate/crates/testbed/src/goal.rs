use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("{field} must be positive, got {value}")]
pub struct NonPositiveInput {
    pub field: &'static str,
    pub value: f64,
}

pub const GOAL_MIN_ML: f64 = 400.0;
pub const GOAL_MAX_ML: f64 = 4000.0;

/// Daily water goal in ml: 35 ml per kg of body weight, clamped to
/// 400..=4000 and rounded to the nearest 10. Age and height are validated
/// but do not enter this simple rule.
pub fn compute_hydration_goal(age_years: f64, weight_kg: f64, height_cm: f64) -> Result<u32, NonPositiveInput> {
    for (field, value) in [
        ("age_years", age_years),
        ("weight_kg", weight_kg),
        ("height_cm", height_cm),
    ] {
        if !value.is_finite() || value <= 0.0 {
            return Err(NonPositiveInput { field, value });
        }
    }
    let raw = (weight_kg * 35.0).clamp(GOAL_MIN_ML, GOAL_MAX_ML);
    Ok(((raw / 10.0).round() * 10.0) as u32)
}
