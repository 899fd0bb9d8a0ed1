from hypothesis import strategies as st

from oracles import INF


@st.composite
def event_lists(draw, max_events=60, max_inst=5, width=6, max_size=15):
    """Submit/cancel sequences with fresh ids, as consumed by ``run_engine``."""
    n_inst = draw(st.integers(2, max_inst))
    n = draw(st.integers(1, max_events))
    events = []
    ids = []
    for k in range(n):
        if ids and draw(st.booleans()) and draw(st.booleans()):
            events.append(("cancel", draw(st.sampled_from(ids))))
            continue
        oid = k + 1
        ids.append(oid)
        owner = draw(st.integers(0, n_inst - 1))
        price = 100 + draw(st.integers(-width, width))
        size = draw(st.integers(1, max_size))
        events.append(("submit", oid, owner, price, -size if draw(st.booleans()) else size))
    return n_inst, events


@st.composite
def limit_maps(draw, n_inst):
    limits = {}
    for i in range(n_inst):
        for j in range(n_inst):
            if i != j:
                c = draw(st.one_of(st.just(INF), st.just(0), st.integers(1, 30)))
                if c:
                    limits[(i, j)] = c
    return limits
