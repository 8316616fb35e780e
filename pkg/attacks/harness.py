"""
Integrity attacks against unconfirmed data-carrying transactions.

An attacker who sees a victim transaction in the mempool forges a variant,
either rewriting its outputs to pay the attacker or editing data pushed by an
input, and races the forgery to the miner. Forging only needs the spent
outputs; racing runs inside a SimChain and is decided by its fee-rate and
arrival rule.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from chainsim.chain import SimChain, verify_input
from maxrate.builder import Source, build_construct, owner_script
from txcodec.hashing import hash160
from txcodec.script import Push, Script, p2pkh_script
from txcodec.standardness import ChainContext, check_standard, dust_threshold
from txcodec.transaction import Transaction, TxInput, TxOutput

from .baseline import build_baseline
from .exceptions import AttackError

logger = logging.getLogger('attacks')

OUTPUT_MOD = 'output-mod'
INPUT_MOD = 'input-mod'
ATTACK_KINDS = (OUTPUT_MOD, INPUT_MOD)
DEFAULT_ATTACKER = hash160(b'attacker')
DEFAULT_OWNER = b'\x03' + hash160(b'victim-owner') + bytes(12)


@dataclass(frozen=True)
class ByteEdit:
    """Replace one byte of one push of one input's scriptSig"""
    input_index: int
    push_index: int
    offset: int
    value: int


@dataclass
class Forgery:
    forged_tx: Transaction = None
    applicable: bool = True
    standard: bool = False
    rule_ids: list = field(default_factory=list)
    stolen_value: int = 0
    reason: str = ''


@dataclass
class AttackOutcome:
    attack_kind: str
    victim_tx: Transaction
    forged_tx: Transaction = None
    forged_standard: bool = False
    forged_mined_first: bool = False
    data_corrupted: bool = False
    reason: str = ''
    rule_ids: list = field(default_factory=list)
    stolen_value: int = 0
    head_start: float = None

    def __post_init__(self):
        if self.data_corrupted and not (self.forged_mined_first and self.forged_standard):
            raise AttackError("a corrupted outcome needs a standard forgery that was mined first")

    def as_dict(self):
        return {
            'attack_kind': self.attack_kind,
            'victim_txid': self.victim_tx.txid_hex,
            'victim_hex': self.victim_tx.hex(),
            'forged_txid': self.forged_tx.txid_hex if self.forged_tx else None,
            'forged_hex': self.forged_tx.hex() if self.forged_tx else None,
            'forged_standard': self.forged_standard,
            'forged_mined_first': self.forged_mined_first,
            'data_corrupted': self.data_corrupted,
            'stolen_value': self.stolen_value,
            'head_start': self.head_start,
            'rule_ids': list(self.rule_ids),
            'reason': self.reason,
        }


def _spent_outputs(tx, lookup):
    spent = {}
    for txin in tx.inputs:
        out = lookup(txin.outpoint)
        if out is None:
            raise AttackError(f"victim input {txin.outpoint} cannot be resolved")
        spent[txin.outpoint] = out
    return spent


def signed_inputs(tx, spent):
    """Indexes of inputs whose spend runs a signature check"""
    found = []
    for i, txin in enumerate(tx.inputs):
        spk = spent[txin.outpoint].script_pubkey
        if spk.is_p2pkh() or spk.has_signature_check():
            found.append(i)
        elif spk.is_p2sh():
            pushes = txin.script_sig.pushes()
            if pushes and Script.from_bytes(pushes[-1]).has_signature_check():
                found.append(i)
    return found


def forge_output_modification(victim, spent, attacker_hash=DEFAULT_ATTACKER, min_fee_rate=1, dust_relay_rate=3):
    """
    Try to rebind victim's value to the attacker. Two layouts are tried:
    every output replaced by one attacker output taking what the fee leaves,
    and the victim's outputs kept with an attacker output appended. The
    attacker output never carries less than the dust threshold. The first
    standard layout is returned, otherwise the last failure.
    """
    signed = signed_inputs(victim, spent)
    if signed:
        return Forgery(applicable=False, reason=f"inputs {signed} are signature checked; outputs are committed")
    attacker = p2pkh_script(attacker_hash)
    total_in = sum(out.value for out in spent.values())
    ctx = ChainContext(spent, min_fee_rate, dust_relay_rate)
    layouts = []
    draft = Transaction(victim.version, victim.inputs, [TxOutput(attacker, 0)])
    layouts.append(('rebind', [], total_in - draft.size * min_fee_rate))
    draft = Transaction(victim.version, victim.inputs, list(victim.outputs) + [TxOutput(attacker, 0)])
    layouts.append(('append', list(victim.outputs), total_in - victim.total_out() - draft.size * min_fee_rate))

    floor = dust_threshold(attacker, dust_relay_rate)
    forgery = None
    for name, kept, value in layouts:
        stolen = max(value, floor)
        forged = Transaction(victim.version, victim.inputs, kept + [TxOutput(attacker, stolen)])
        report = check_standard(forged, ctx)
        if report.passed:
            return Forgery(forged, True, True, [], stolen, f"{name}: attacker output takes {stolen}")
        reason = report.violations[0].reason
        forgery = Forgery(forged, True, False, report.rule_ids or ['no-value'], 0, f"{name}: {reason}")
        logger.debug(f"✗ {name} forgery of {victim.txid_hex[:16]} fails: {reason}")
    return forgery


def mutate(victim, edit):
    """Victim with one pushed byte replaced; None when the edit changes nothing"""
    if edit is None:
        return None
    txin = victim.inputs[edit.input_index]
    elements = list(txin.script_sig.elements)
    pushes = [i for i, e in enumerate(elements) if isinstance(e, Push)]
    position = pushes[edit.push_index]
    push = elements[position]
    if push.data[edit.offset] == edit.value:
        return None
    data = bytearray(push.data)
    data[edit.offset] = edit.value
    elements[position] = Push(bytes(data), push.opcode)
    inputs = list(victim.inputs)
    inputs[edit.input_index] = TxInput(txin.outpoint, Script(tuple(elements)), txin.sequence)
    return Transaction(victim.version, inputs, victim.outputs)


def forge_input_modification(victim, spent, edit, min_fee_rate=1, dust_relay_rate=3):
    """Apply edit and check the forged input still unlocks its output"""
    if edit is not None and edit.input_index in signed_inputs(victim, spent):
        return Forgery(applicable=False, reason=f"input {edit.input_index} is signature checked")
    forged = mutate(victim, edit)
    if forged is None:
        return Forgery(None, True, False, [], 0, 'empty mutation: forged transaction equals victim')
    txin = forged.inputs[edit.input_index]
    error = verify_input(txin, spent[txin.outpoint])
    if error:
        return Forgery(forged, True, False, ['script-verify'], 0, f"mutated input fails: {error}")
    report = check_standard(forged, ChainContext(spent, min_fee_rate, dust_relay_rate))
    if not report.passed:
        return Forgery(forged, True, False, report.rule_ids, 0, report.violations[0].reason)
    return Forgery(forged, True, True, [], 0, f"input {edit.input_index} push {edit.push_index} "
                                              f"byte {edit.offset} rewritten, script still valid")


def race(chain, victim, forged, head_start=1.0, max_blocks=10):
    """
    Victim arrives at the chain's current time, the forgery head_start
    seconds earlier; at equal fee rate and arrival the victim, relayed first,
    wins. Returns True when the forgery confirms first.
    """
    t = chain.time
    victim_result = chain.submit_tx(victim, t=t, klass='victim')
    forged_result = chain.submit_tx(forged, t=t - head_start, klass='forged')
    if not forged_result and not victim_result:
        raise AttackError(f"both transactions rejected: {forged_result.rule_id}, {victim_result.rule_id}")
    for _ in range(max_blocks):
        chain.mine_block()
        if chain.is_confirmed(forged.txid_hex):
            return True
        if chain.is_confirmed(victim.txid_hex):
            return False
    raise AttackError(f"neither transaction confirmed within {max_blocks} blocks")


def _outcome(kind, chain, victim, forgery, head_start):
    outcome = AttackOutcome(kind, victim, forgery.forged_tx, forgery.standard,
                            rule_ids=forgery.rule_ids, stolen_value=forgery.stolen_value,
                            reason=forgery.reason, head_start=head_start)
    if not forgery.standard:
        chain.broadcast(victim)
        chain.mine_until([victim.txid_hex])
        return outcome
    outcome.forged_mined_first = race(chain, victim, forgery.forged_tx, head_start)
    outcome.data_corrupted = outcome.forged_mined_first
    outcome.reason += '; forged mined first' if outcome.forged_mined_first else '; victim mined first'
    level = logging.WARNING if outcome.data_corrupted else logging.INFO
    logger.log(level, f"{'✗' if outcome.data_corrupted else '✓'} [{kind.upper()}] {victim.txid_hex[:16]}: "
                      f"{outcome.reason}")
    return outcome


def output_modification_attack(chain, victim, attacker_hash=DEFAULT_ATTACKER, head_start=1.0):
    spent = _spent_outputs(victim, chain.lookup_output)
    forgery = forge_output_modification(victim, spent, attacker_hash, chain.min_fee_rate, chain.dust_relay_rate)
    return _outcome(OUTPUT_MOD, chain, victim, forgery, head_start)


def input_modification_attack(chain, victim, edit, head_start=1.0):
    spent = _spent_outputs(victim, chain.lookup_output)
    forgery = forge_input_modification(victim, spent, edit, chain.min_fee_rate, chain.dust_relay_rate)
    return _outcome(INPUT_MOD, chain, victim, forgery, head_start)


def sample_edits(tx, count, seed=0):
    """Random single-byte edits over every non-empty push of every input"""
    rng = np.random.default_rng([seed, 7])
    targets = [(i, p, len(data)) for i, txin in enumerate(tx.inputs)
               for p, data in enumerate(txin.script_sig.pushes()) if data]
    edits = []
    for _ in range(count):
        i, p, length = targets[int(rng.integers(len(targets)))]
        offset = int(rng.integers(length))
        original = tx.inputs[i].script_sig.pushes()[p][offset]
        edits.append(ByteEdit(i, p, offset, (original + int(rng.integers(1, 256))) % 256))
    return edits


def fuzz_input_modification(victim, spent, samples=10_000, seed=0):
    """Forgeries for sampled edits, no racing; the valid ones are the dangerous ones"""
    forgeries = [forge_input_modification(victim, spent, edit) for edit in sample_edits(victim, samples, seed)]
    valid = sum(f.standard for f in forgeries)
    logger.info(f"[FUZZ] {victim.txid_hex[:16]}: {valid}/{len(forgeries)} mutations still valid")
    return forgeries


# Scenarios

@dataclass
class Scenario:
    """A chain with the victim's parents confirmed and the victim not yet broadcast"""
    chain: SimChain
    technique: str
    victim: Transaction
    construct: object

    @property
    def spent(self):
        return _spent_outputs(self.victim, self.chain.lookup_output)


def attack_scenario(technique='max-rate', payload_size=20_000, seed=0, victim_index=-1, model=None):
    """
    Write a random payload with technique ('max-rate' or 'staged-baseline')
    up to its spending stage. victim_index picks the spending transaction.
    """
    payload = np.random.default_rng([seed, 11]).bytes(payload_size)
    chain = SimChain(seed=seed)
    owner = owner_script(DEFAULT_OWNER)
    outpoint = chain.grant(owner, 10 * payload_size + 10_000_000)
    chain.mine_block()
    source = Source(outpoint, chain.lookup_output(outpoint).value)
    if technique == 'max-rate':
        construct = build_construct(payload, source, model, DEFAULT_OWNER)
    elif technique == 'staged-baseline':
        construct = build_baseline(payload, source, DEFAULT_OWNER)
    else:
        raise AttackError(f"unknown technique {technique!r}; choose max-rate or staged-baseline")
    for stage in construct.stages()[:-1]:
        for tx in stage:
            chain.broadcast(tx)
        chain.mine_until([tx.txid_hex for tx in stage])
    victim = construct.spending[victim_index]
    logger.debug(f"[SCENARIO] {technique}: victim {victim.txid_hex[:16]} with {len(victim.inputs)} inputs")
    return Scenario(chain, technique, victim, construct)


def manifest_scenario(manifest, seed=0, victim_index=-1):
    """
    Replay a construct manifest on a fresh chain up to its spending stage.
    The manifest must record the source output script so it can be imported.
    """
    spending = manifest.by_role('spending')
    if not spending:
        raise AttackError("manifest has no spending transactions")
    if manifest.source_outpoint is None or manifest.source_script is None:
        raise AttackError("manifest does not record its source output script")
    spending_ids = {tx.txid for tx in spending}
    chain = SimChain(seed=seed)
    chain.import_utxo(manifest.source_outpoint, TxOutput(manifest.source_script, manifest.source_value))
    for stage in manifest.stages():
        carriers = [tx for tx in stage if tx.txid not in spending_ids]
        if not carriers:
            continue
        for tx in carriers:
            chain.broadcast(tx)
        chain.mine_until([tx.txid_hex for tx in carriers])
    try:
        victim = spending[victim_index]
    except IndexError as e:
        raise AttackError(f"victim index {victim_index} out of range for {len(spending)} spending txs") from e
    logger.debug(f"[SCENARIO] manifest {manifest.label or manifest.root.txid_hex[:16]}: victim {victim.txid_hex[:16]}")
    return Scenario(chain, 'manifest', victim, manifest)


def head_start_sweep(scenario_factory, grid, kind=OUTPUT_MOD, edit=None):
    """
    (head_start, forged_won) per grid point, each on a fresh scenario.
    scenario_factory() returns a Scenario.
    """
    points = []
    for head_start in grid:
        scenario = scenario_factory()
        if kind == OUTPUT_MOD:
            outcome = output_modification_attack(scenario.chain, scenario.victim, head_start=head_start)
        else:
            outcome = input_modification_attack(
                scenario.chain, scenario.victim, edit or ByteEdit(0, 0, 0, 0x00), head_start=head_start)
        points.append((float(head_start), outcome.forged_mined_first))
    return points


def win_rate(points):
    """Fraction of forged wins per head start, sorted by head start"""
    by_start = {}
    for head_start, won in points:
        by_start.setdefault(head_start, []).append(won)
    return [(h, float(np.mean(w))) for h, w in sorted(by_start.items())]


def write_report(outcomes, path, **meta):
    """JSON attack report with victim and forged hex"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report = dict(meta, outcomes=[o.as_dict() for o in outcomes],
                  corrupted=sum(o.data_corrupted for o in outcomes))
    path.write_text(json.dumps(report, indent=2))
    logger.info(f"✓ Wrote attack report with {len(outcomes)} outcomes to {path}")
    return path
