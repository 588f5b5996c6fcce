"""Child-process fixtures for exercising the wire protocol end to end.

Both fixtures are runnable modules (``python -m mrtwin.fixtures.echo_generator``
and ``python -m mrtwin.fixtures.echo_sut``) and support misbehavior modes so
the harness's timeout and malformed-response handling can be tested against a
real process rather than a mock.
"""
