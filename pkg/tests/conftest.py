from hypothesis import HealthCheck, settings

settings.register_profile(
    "bpre",
    derandomize=True,
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("bpre")
