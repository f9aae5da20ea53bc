# FineHash Django apps
