# Retrieval App
