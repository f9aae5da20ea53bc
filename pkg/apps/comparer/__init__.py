# Comparer App
