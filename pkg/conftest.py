import pytest


def pytest_collection_modifyitems(config, items):
    """Mirror core.testing.SpecsTestRunner: skip tests tagged ``slow`` unless SPECS_RUN_SLOW."""
    from django.conf import settings

    if settings.SPECS_RUN_SLOW:
        return
    skip_slow = pytest.mark.skip(reason='tagged slow; set SPECS_RUN_SLOW=True to run')
    for item in items:
        tags = set(getattr(getattr(item, 'obj', None), 'tags', ()) or ())
        tags |= set(getattr(getattr(item, 'cls', None), 'tags', ()) or ())
        if 'slow' in tags:
            item.add_marker(skip_slow)
