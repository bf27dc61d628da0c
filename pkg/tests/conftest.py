import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("g2verify", deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("g2verify")

NON_STRETCH = ["flat", "bryant_erp", "lauret_GJ", "erp_M2", "erp_M3_homog", "third_quadratic", "neg_m1_flat",
               "neg_25_t2bundle", "soliton_twistor", "soliton_hk", "weierstrass_typeA"]


@pytest.fixture(scope="session")
def built():
    from g2verify import catalog
    return catalog.build


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
