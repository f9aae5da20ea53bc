# Collaborative Learning App
