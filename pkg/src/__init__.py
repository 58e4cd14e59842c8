"""Single-classifier BLSTM word sense disambiguation."""
