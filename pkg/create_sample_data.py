from slotfill.config import configure_logging
from slotfill.data.sample import write_sample_corpus

# Small SGD-layout corpus for trying the pipeline end to end:
#   python create_sample_data.py
#   python -m slotfill ingest-sgd --input data/sgd_sample --output data/sgd.jsonl
configure_logging()
write_sample_corpus("data/sgd_sample", n_dialogues=200, seed=0)
