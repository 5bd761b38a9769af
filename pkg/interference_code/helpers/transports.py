# Copyright 2023 D-Wave
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
#
"""All-to-all exchanges between the workers of one stressor run.

Every worker sends the same payload to every other worker and receives one payload
from each of them. ``all_to_all`` returns only once every worker has finished the
exchange, so an exchange is also a synchronization point.
"""
import abc
import logging
import selectors
import socket
import threading

from helpers.errors import CommunicationError, ConfigError

logger = logging.getLogger(__name__)

CHUNK_BYTES = 1 << 16
ABORTED_BY_PEER = 'exchange aborted by a peer'


class Transport(abc.ABC):
    """Base class of all-to-all transports among ``workers`` endpoints.

    Args:
        workers (int): number of endpoints (ranks 0 .. workers - 1)
        timeout (float): seconds a worker waits for its peers before failing
    """

    name = 'abstract'

    def __init__(self, workers, timeout=120.0):
        if workers < 1:
            raise ConfigError(f'a transport needs at least one worker, got {workers}')
        self.workers = workers
        self.timeout = timeout
        self._barrier = threading.Barrier(workers, timeout=timeout)
        self._aborted = threading.Event()

    def __enter__(self):
        self.open()
        return self

    def __exit__(self, *exc_info):
        self.close()

    def open(self):
        """Acquires the resources of the transport."""

    def close(self):
        """Releases the resources of the transport."""

    def abort(self):
        """Wakes up every worker blocked in an exchange; they fail with a CommunicationError."""
        self._aborted.set()
        self._barrier.abort()

    @property
    def aborted(self):
        return self._aborted.is_set()

    def all_to_all(self, rank, payload, iteration=None):
        """Sends ``payload`` to every other worker and collects theirs.

        Args:
            rank (int): rank of the calling worker
            payload (bytes): data sent to each peer
            iteration (int, optional): communication iteration, used in error messages

        Returns:
            list[bytes]: payloads received, ordered by peer rank
        """
        if self.aborted:
            raise CommunicationError(ABORTED_BY_PEER, iteration, aborted=True)
        try:
            received = self._exchange(rank, payload, iteration)
            self._barrier.wait()
        except threading.BrokenBarrierError as e:
            raise CommunicationError(ABORTED_BY_PEER, iteration, aborted=True) from e
        except CommunicationError:
            self.abort()
            raise
        except OSError as e:
            self.abort()
            raise CommunicationError(str(e), iteration) from e
        return received

    @abc.abstractmethod
    def _exchange(self, rank, payload, iteration):
        """Moves the payloads; returns the received ones ordered by peer rank."""


class InProcessTransport(Transport):
    """Exchanges payloads through shared mailboxes; deterministic, used by tests."""

    name = 'inproc'

    def __init__(self, workers, timeout=120.0):
        super().__init__(workers, timeout)
        self._mailboxes = [[None] * workers for _ in range(workers)]
        self._deposited = threading.Barrier(workers, timeout=timeout)

    def abort(self):
        super().abort()
        self._deposited.abort()

    def _exchange(self, rank, payload, iteration):
        for destination in range(self.workers):
            if destination != rank:
                self._mailboxes[destination][rank] = bytearray(payload)
        self._deposited.wait()
        return [bytes(self._mailboxes[rank][source])
                for source in range(self.workers) if source != rank]


class LoopbackTransport(Transport):
    """Exchanges payloads over TCP connections on the loopback interface.

    One connection links every pair of workers. Each worker multiplexes its sends and
    receives with a selector, so large payloads cannot deadlock on full socket buffers.
    A socket pair joined to every selector wakes all waiting workers on abort.
    """

    name = 'loopback'

    def __init__(self, workers, timeout=120.0, host='127.0.0.1'):
        super().__init__(workers, timeout)
        self.host = host
        self._sockets = None
        self._wakeup = None

    def open(self):
        sockets = [[None] * self.workers for _ in range(self.workers)]
        with socket.create_server((self.host, 0)) as listener:
            listener.settimeout(self.timeout)
            address = listener.getsockname()
            for low in range(self.workers):
                for high in range(low + 1, self.workers):
                    client = socket.create_connection(address, timeout=self.timeout)
                    server, _ = listener.accept()
                    for end in (client, server):
                        end.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                        end.setblocking(False)
                    sockets[low][high] = client
                    sockets[high][low] = server
        self._sockets = sockets
        self._wakeup = socket.socketpair()
        logger.debug('opened %d loopback connections', self.workers * (self.workers - 1) // 2)

    def close(self):
        if self._sockets is None:
            return
        for row in self._sockets:
            for end in row:
                if end is not None:
                    end.close()
        for end in self._wakeup:
            end.close()
        self._sockets = self._wakeup = None

    def abort(self):
        first = not self.aborted
        super().abort()
        wakeup = self._wakeup
        if first and wakeup is not None:
            # never drained: the read end stays ready for every selector
            try:
                wakeup[1].send(b'\0')
            except OSError:
                pass

    def _exchange(self, rank, payload, iteration):
        if self._sockets is None:
            raise CommunicationError('loopback transport is not open', iteration)
        peers = [p for p in range(self.workers) if p != rank]
        expected = len(payload)
        if not peers or expected == 0:
            return [b''] * len(peers)

        outgoing = {p: memoryview(payload) for p in peers}
        incoming = {p: bytearray() for p in peers}
        with selectors.DefaultSelector() as selector:
            for p in peers:
                selector.register(self._sockets[rank][p], selectors.EVENT_READ | selectors.EVENT_WRITE, p)
            selector.register(self._wakeup[0], selectors.EVENT_READ, None)
            pending = set(peers)
            while pending:
                events = selector.select(self.timeout)
                if not events:
                    raise CommunicationError(f'worker {rank} timed out', iteration)
                if self.aborted:
                    raise CommunicationError(ABORTED_BY_PEER, iteration, aborted=True)
                for key, mask in events:
                    p = key.data
                    if p is None:
                        continue
                    sock = key.fileobj
                    if mask & selectors.EVENT_WRITE and outgoing[p]:
                        sent = sock.send(outgoing[p][:CHUNK_BYTES])
                        outgoing[p] = outgoing[p][sent:]
                    if mask & selectors.EVENT_READ and len(incoming[p]) < expected:
                        chunk = sock.recv(min(CHUNK_BYTES, expected - len(incoming[p])))
                        if not chunk:
                            raise CommunicationError(f'peer {p} closed the connection', iteration)
                        incoming[p] += chunk
                    wanted = ((selectors.EVENT_READ if len(incoming[p]) < expected else 0)
                              | (selectors.EVENT_WRITE if outgoing[p] else 0))
                    if wanted:
                        selector.modify(sock, wanted, p)
                    else:
                        selector.unregister(sock)
                        pending.discard(p)
        return [bytes(incoming[p]) for p in peers]


TRANSPORTS = {
    InProcessTransport.name: InProcessTransport,
    LoopbackTransport.name: LoopbackTransport,
}


def make_transport(name, workers, **kwargs):
    """Builds a transport by name ('inproc' or 'loopback')."""
    try:
        return TRANSPORTS[name](workers, **kwargs)
    except KeyError:
        raise ConfigError(f"unknown transport {name!r}, expected one of {sorted(TRANSPORTS)}") from None
