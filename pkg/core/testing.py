from django.conf import settings
from django.test.runner import DiscoverRunner


class SpecsTestRunner(DiscoverRunner):
    """Test runner that leaves Monte Carlo tests tagged ``slow`` out by default.

    Set SPECS_RUN_SLOW=True (or pass ``--tag slow``) to include them.
    """

    def __init__(self, *args, tags=None, exclude_tags=None, **kwargs):
        exclude_tags = set(exclude_tags or ())
        if not settings.SPECS_RUN_SLOW and 'slow' not in (tags or ()):
            exclude_tags.add('slow')
        super().__init__(*args, tags=tags, exclude_tags=exclude_tags, **kwargs)
