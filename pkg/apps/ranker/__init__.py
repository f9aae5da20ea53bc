# Ranker App
