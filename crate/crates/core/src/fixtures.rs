//! Small reference models used throughout the tests and documentation.
//! All have unit disturbance variances and zero means.

use crate::graph::PathDiagram;
use crate::sem::LinearSem;

/// `X -> Y` with coefficient 0.5. Implied: var(X) = 1, cov(X,Y) = 0.5,
/// var(Y) = 1.25.
pub fn m1() -> LinearSem {
    LinearSem::new(
        PathDiagram::builder(["X", "Y"])
            .edge("X", "Y", 0.5)
            .build()
            .unwrap(),
    )
    .unwrap()
}

/// Confounded chain `Z -> X (1.0)`, `Z -> Y (1.0)`, `X -> Y (0.5)`.
/// Implied: var(X) = 2, cov(X,Y) = 2, var(Y) = 3.5, cov(Z,Y) = 1.5.
pub fn m2() -> LinearSem {
    LinearSem::new(
        PathDiagram::builder(["Z", "X", "Y"])
            .edge("Z", "X", 1.0)
            .edge("Z", "Y", 1.0)
            .edge("X", "Y", 0.5)
            .build()
            .unwrap(),
    )
    .unwrap()
}

/// Instrument graph `Z -> X (1.0)`, `X -> Y (0.5)` with latent confounding
/// `X <-> Y (0.5)`. Implied: var(Y) = 2, cov(X,Y) = 1.5, cov(Z,Y) = 0.5.
pub fn m3() -> LinearSem {
    LinearSem::new(
        PathDiagram::builder(["Z", "X", "Y"])
            .edge("Z", "X", 1.0)
            .edge("X", "Y", 0.5)
            .confounded("X", "Y", 0.5)
            .build()
            .unwrap(),
    )
    .unwrap()
}

/// Parametric cancellation `Z -> X (1.0)`, `Z -> Y (-1.0)`, `X -> Y (0.5)`:
/// the regression slope of Y on X vanishes while the total effect is 0.5.
/// Implied: var(Y) = 1.5, cov(X,Y) = 0.
pub fn m4() -> LinearSem {
    LinearSem::new(
        PathDiagram::builder(["Z", "X", "Y"])
            .edge("Z", "X", 1.0)
            .edge("Z", "Y", -1.0)
            .edge("X", "Y", 0.5)
            .build()
            .unwrap(),
    )
    .unwrap()
}
