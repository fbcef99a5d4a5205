use crate::diag::{Diagnostic, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellOp {
    Take,
    Put,
    Drop,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum St {
    Free,
    Held,
    Dropped,
}

fn run(ops: &[CellOp]) -> Result<St, Diagnostic> {
    let err = |m: &str| Err(Diagnostic::error("cell-protocol", m, Span::default()));
    let mut st = St::Free;
    for op in ops {
        st = match (st, op) {
            (St::Free, CellOp::Take) => St::Held,
            (St::Held, CellOp::Put) => St::Free,
            (St::Free, CellOp::Drop) => St::Dropped,
            (St::Held, CellOp::Take) => return err("take while the cell is already taken (missing put)"),
            (St::Held, CellOp::Drop) => return err("drop while the cell is taken (missing put)"),
            (St::Free, CellOp::Put) => return err("put without a preceding take"),
            (St::Dropped, _) => return err("use after drop"),
        };
    }
    Ok(st)
}

/// Accepts exactly the sequences matching `(take;put)*;drop`.
pub fn check_cell_protocol(ops: &[CellOp]) -> Result<(), Diagnostic> {
    match run(ops)? {
        St::Dropped => Ok(()),
        St::Free => Err(Diagnostic::error("cell-leak", "the usage is never dropped", Span::default())),
        St::Held => Err(Diagnostic::error("cell-leak", "the cell is taken but never put back", Span::default())),
    }
}

/// Accepts every prefix of a sequence accepted by [`check_cell_protocol`].
pub fn check_prefix(ops: &[CellOp]) -> Result<(), Diagnostic> {
    run(ops).map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::CellOp::*;
    use super::*;

    #[test]
    fn regex_membership() {
        assert!(check_cell_protocol(&[Take, Put, Take, Put, Drop]).is_ok());
        assert!(check_cell_protocol(&[Drop]).is_ok());
        assert_eq!(check_cell_protocol(&[Take, Drop]).unwrap_err().rule, "cell-protocol");
        assert_eq!(check_cell_protocol(&[Take, Put, Put]).unwrap_err().rule, "cell-protocol");
        assert_eq!(check_cell_protocol(&[Take, Take]).unwrap_err().rule, "cell-protocol");
        assert_eq!(check_cell_protocol(&[Take, Put]).unwrap_err().rule, "cell-leak");
    }

    #[test]
    fn prefixes() {
        assert!(check_prefix(&[Take]).is_ok());
        assert!(check_prefix(&[]).is_ok());
        assert!(check_prefix(&[Drop, Take]).is_err());
    }
}
