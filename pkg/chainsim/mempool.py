"""
Unconfirmed transaction pool ordered by fee rate, then arrival.

Entries are either real transactions (SimChain) or synthetic size/fee
records (simulator runs); the pool only looks at size, fee, arrival,
parents and spent outpoints.
"""
import bisect
import logging
from collections import defaultdict
from dataclasses import dataclass

logger = logging.getLogger('chainsim')

MAX_ANCESTOR_COUNT = 25
MAX_ANCESTOR_SIZE = 101_000

# Block assembly gives up after this many consecutive misses once the
# block is within NEAR_FULL_MARGIN bytes of the limit
MAX_CONSECUTIVE_FAILURES = 1_000
NEAR_FULL_MARGIN = 4_000
MIN_TX_SIZE = 60


@dataclass
class MempoolEntry:
    txid: str
    size: int
    fee: int
    arrival_time: float
    seq: int = 0
    parents: frozenset = frozenset()
    spends: tuple = ()
    klass: str = 'financial'
    tx: object = None
    ancestor_count: int = 1
    ancestor_size: int = 0

    @property
    def fee_rate(self):
        return self.fee / self.size

    @property
    def sort_key(self):
        return (-self.fee / self.size, self.arrival_time, self.seq)


class Mempool:
    def __init__(self):
        self.entries = {}
        self._order = []
        self._children = defaultdict(set)
        self._spenders = defaultdict(set)
        self.total_size = 0

    def __len__(self):
        return len(self.entries)

    def __contains__(self, txid):
        return txid in self.entries

    def get(self, txid):
        return self.entries.get(txid)

    def ancestors(self, parents):
        """All in-pool ancestors reachable from the given parent txids"""
        seen = set()
        stack = [p for p in parents if p in self.entries]
        while stack:
            txid = stack.pop()
            if txid in seen:
                continue
            seen.add(txid)
            stack.extend(p for p in self.entries[txid].parents if p in self.entries)
        return seen

    def ancestor_stats(self, parents):
        found = self.ancestors(parents)
        return len(found), sum(self.entries[t].size for t in found)

    def descendants(self, txid):
        seen = set()
        stack = list(self._children.get(txid, ()))
        while stack:
            child = stack.pop()
            if child in seen or child not in self.entries:
                continue
            seen.add(child)
            stack.extend(self._children.get(child, ()))
        return seen

    def conflicts(self, spends):
        """txids of pool entries spending any of the given outpoints"""
        found = set()
        for outpoint in spends:
            found.update(self._spenders.get(outpoint, ()))
        return found

    def check_limits(self, parents, size):
        """Rule id violated by a new entry with these parents, or None"""
        count, total = self.ancestor_stats(parents)
        if count + 1 > MAX_ANCESTOR_COUNT:
            return 'chain-count'
        if total + size > MAX_ANCESTOR_SIZE:
            return 'chain-size'
        return None

    def add(self, entry):
        parents = frozenset(p for p in entry.parents if p in self.entries)
        entry.parents = parents
        count, total = self.ancestor_stats(parents)
        entry.ancestor_count = count + 1
        entry.ancestor_size = total + entry.size
        self.entries[entry.txid] = entry
        bisect.insort(self._order, (entry.sort_key, entry.txid))
        for parent in parents:
            self._children[parent].add(entry.txid)
        for outpoint in entry.spends:
            self._spenders[outpoint].add(entry.txid)
        self.total_size += entry.size
        return entry

    def remove(self, txids):
        removed = []
        for txid in txids:
            entry = self.entries.pop(txid, None)
            if entry is None:
                continue
            removed.append(entry)
            self.total_size -= entry.size
            for parent in entry.parents:
                children = self._children.get(parent)
                if children:
                    children.discard(txid)
            for outpoint in entry.spends:
                spenders = self._spenders.get(outpoint)
                if spenders is not None:
                    spenders.discard(txid)
                    if not spenders:
                        del self._spenders[outpoint]
            self._children.pop(txid, None)
        if removed:
            gone = {e.txid for e in removed}
            self._order = [item for item in self._order if item[1] not in gone]
        return removed

    def ordered(self):
        return [self.entries[txid] for _, txid in self._order]

    def block_template(self, max_size):
        """
        Greedy fill in fee-rate order, earlier arrival first on ties.

        Entries that do not fit are skipped. A child whose in-pool parent
        has not been picked yet is held back and retried right after that
        parent is picked. Entries double-spending something already picked
        are skipped.

        Returns:
            list: MempoolEntry objects, parents before children
        """
        remaining = max_size
        selected = []
        picked = set()
        used = set()
        waiting = defaultdict(list)
        failures = 0

        def admit(entry):
            nonlocal remaining
            queue = [entry]
            while queue:
                current = queue.pop(0)
                if current.txid in picked or current.size > remaining:
                    continue
                if any(op in used for op in current.spends):
                    continue
                missing = [p for p in current.parents if p not in picked]
                if missing:
                    waiting[missing[0]].append(current)
                    continue
                selected.append(current)
                picked.add(current.txid)
                used.update(current.spends)
                remaining -= current.size
                queue.extend(waiting.pop(current.txid, ()))

        for _, txid in self._order:
            if remaining < MIN_TX_SIZE:
                break
            entry = self.entries[txid]
            if entry.size > remaining:
                failures += 1
                if failures > MAX_CONSECUTIVE_FAILURES and remaining < NEAR_FULL_MARGIN:
                    break
                continue
            failures = 0
            admit(entry)
        return selected
