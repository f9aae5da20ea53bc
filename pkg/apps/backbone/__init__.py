# Backbone App
