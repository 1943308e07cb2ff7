"""Tests for the MCP tool functions."""

from fracdiff_cldg.mcp_server import convergence_study, solve, stability_check


class TestTools:
    """Tests for the tools, called directly."""

    def test_solve(self) -> None:
        """Test a small solve with errors in the reply."""
        reply = solve(problem="example1", alpha=1.5, inv_h=4, t_final=0.005)
        assert reply.startswith("example1: 1/h=4")
        assert "E1 = " in reply

    def test_solve_error_message(self) -> None:
        """Test that invalid input becomes an error string."""
        reply = solve(alpha=2.5)
        assert reply.startswith("Error:")

    def test_convergence_study_json(self) -> None:
        """Test the JSON form of a study."""
        reply = convergence_study(alpha=1.5, cells="4,8", t_final=0.005, as_json=True)
        assert '"rows"' in reply
        assert '"inv_h": 8' in reply

    def test_stability_check(self) -> None:
        """Test the stability verdict."""
        reply = stability_check(alpha=1.5, inv_h=4, t_final=0.005)
        assert reply.startswith("Energy non-increasing")

    def test_custom_problem_without_dimension(self) -> None:
        """Test that a custom problem needs its dimension."""
        assert solve(problem="custom", alpha=1.5, inv_h=4).startswith("Error:")
