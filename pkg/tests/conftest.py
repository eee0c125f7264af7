import pytest

from tabletop_agent.server import serve


@pytest.fixture(scope="module")
def server():
    srv = serve("127.0.0.1:0", background=True)
    yield srv
    srv.shutdown()
    srv.server_close()
