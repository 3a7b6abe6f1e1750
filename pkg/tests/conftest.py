from hypothesis import settings

# modest example counts: the suite also runs long MCMC integration tests
settings.register_profile("suite", max_examples=50, deadline=None)
settings.load_profile("suite")
